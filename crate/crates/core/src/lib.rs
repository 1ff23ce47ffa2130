//! Numerical laboratory for blowup analysis of regular Liouville systems on the flat torus.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod criteria;
pub mod error;
pub mod fredholm;
pub mod linearized;
pub mod ode;
pub mod quad;
pub mod radial_bubble;
pub mod report;
pub mod spectral;
pub mod torus;

pub use error::{Error, Result};
