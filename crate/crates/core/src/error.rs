use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("infeasible ray: {0}")]
    InfeasibleRay(String),
    #[error("non-integrable configuration: {0}")]
    NonIntegrable(String),
    #[error("step size collapsed at t = {0}")]
    Stiffness(f64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("near-singular solve (sigma_min = {sigma_min:e}, norm = {norm:e}); use the projected solve")]
    RequiresProjection { sigma_min: f64, norm: f64 },
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
