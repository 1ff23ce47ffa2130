//! JSON run configuration shared by all subcommands.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{gamma_project, m_star, CouplingMatrix, MassData, ParamVector};
use crate::error::{Error, Result};
use crate::torus::{HField, Point};

fn default_n_points() -> usize {
    1
}
fn default_tau_factors() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_grid() -> usize {
    512
}
fn default_d_grid() -> usize {
    256
}
fn default_fredholm_nodes() -> usize {
    200
}
fn default_beta() -> f64 {
    0.1
}
fn default_r_max() -> f64 {
    1e5
}
fn default_tol() -> f64 {
    1e-10
}
fn default_restarts() -> usize {
    20
}
fn default_fredholm_tau() -> f64 {
    0.25
}

/// Run configuration. Either `rho` (on the critical surface) or `rho_ray` (projected onto it) is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Rows of the coupling matrix A.
    pub coupling: Vec<Vec<f64>>,
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    #[serde(default)]
    pub rho_ray: Option<Vec<f64>>,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// Blowup points (or Newton starting points).
    #[serde(default)]
    pub points: Vec<Point>,
    /// ln h_i as truncated Fourier series; constant h ≡ 1 when omitted.
    #[serde(default)]
    pub h: Vec<HField>,
    /// Initial α for `bubble solve`; α_1 is also the fixed value in matching.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    /// Target σ for `bubble match`; defaults to ρ/(2πN).
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    /// Disk radius; d_min/4 (1/4 for one point) when omitted.
    #[serde(default)]
    pub tau: Option<f64>,
    /// τ used by the weighted-space checks.
    #[serde(default = "default_fredholm_tau")]
    pub fredholm_tau: f64,
    #[serde(default = "default_tau_factors")]
    pub tau_factors: Vec<f64>,
    /// Torus Fourier grid for assembly.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Cell grid for the D_it quadrature.
    #[serde(default = "default_d_grid")]
    pub d_grid: usize,
    #[serde(default = "default_fredholm_nodes")]
    pub fredholm_nodes: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Point pairs [x, q] for `torus green`.
    #[serde(default)]
    pub pairs: Vec<[Point; 2]>,
    /// Report file names inside the output directory.
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_json_name")]
    pub json: String,
    #[serde(default)]
    pub csv: Option<String>,
}

fn default_json_name() -> String {
    "report.json".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            json: default_json_name(),
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s)
    }

    /// Cross-field checks beyond what the types enforce.
    pub fn validate(&self) -> Result<()> {
        let n = self.coupling.len();
        if n == 0 || self.coupling.iter().any(|r| r.len() != n) {
            return Err(Error::Config("coupling must be a nonempty square matrix".into()));
        }
        let check_len = |name: &str, v: &Option<Vec<f64>>| match v {
            Some(x) if x.len() != n => Err(Error::Config(format!(
                "{name} has {} entries, coupling has {n} components",
                x.len()
            ))),
            _ => Ok(()),
        };
        check_len("rho", &self.rho)?;
        check_len("rho_ray", &self.rho_ray)?;
        check_len("alpha", &self.alpha)?;
        check_len("sigma", &self.sigma)?;
        if self.rho.is_some() && self.rho_ray.is_some() {
            return Err(Error::Config("give either rho or rho_ray, not both".into()));
        }
        if !self.h.is_empty() && self.h.len() != n {
            return Err(Error::Config(format!("h has {} fields, expected {n}", self.h.len())));
        }
        if !self.points.is_empty() && self.points.len() != self.n_points {
            return Err(Error::Config(format!(
                "{} points listed but n_points = {}",
                self.points.len(),
                self.n_points
            )));
        }
        if self.n_points == 0 {
            return Err(Error::Config("n_points must be positive".into()));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Config("eps_list entries must lie in (0, 1)".into()));
        }
        if self.tau_factors.is_empty() || self.tau_factors.iter().any(|&f| !(f > 0.0 && f < 0.5)) {
            return Err(Error::Config("tau_factors must lie in (0, 1/2)".into()));
        }
        if self.grid < 16 || self.d_grid < 16 {
            return Err(Error::Config("grids need at least 16 nodes per side".into()));
        }
        if !(self.tol > 0.0) || !(self.r_max > 1.0) {
            return Err(Error::Config("tol must be positive and r_max > 1".into()));
        }
        Ok(())
    }

    pub fn coupling_matrix(&self) -> Result<CouplingMatrix> {
        CouplingMatrix::from_rows(&self.coupling)
    }

    /// ρ on the critical surface: given directly or projected from `rho_ray`.
    pub fn param_vector(&self) -> Result<ParamVector> {
        let a = self.coupling_matrix()?;
        match (&self.rho, &self.rho_ray) {
            (Some(r), _) => ParamVector::new(r.clone(), self.n_points),
            (None, Some(ray)) => gamma_project(&a, ray, self.n_points),
            (None, None) => Err(Error::Config("rho or rho_ray is required".into())),
        }
    }

    pub fn masses(&self) -> Result<MassData> {
        Ok(m_star(&self.coupling_matrix()?, &self.param_vector()?))
    }

    /// σ targets for matching: explicit `sigma`, else ρ/(2πN).
    pub fn sigma_target(&self) -> Result<Vec<f64>> {
        match &self.sigma {
            Some(s) => Ok(s.clone()),
            None => {
                let rho = self.param_vector()?;
                Ok(rho.rho.iter().map(|r| r / (2.0 * PI * self.n_points as f64)).collect())
            }
        }
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone().unwrap_or_else(|| vec![0.0; self.coupling.len()])
    }

    pub fn h_fields(&self) -> Vec<HField> {
        if self.h.is_empty() {
            vec![HField::default(); self.coupling.len()]
        } else {
            self.h.clone()
        }
    }

    pub fn require_points(&self) -> Result<&[Point]> {
        if self.points.is_empty() {
            Err(Error::Config("points are required for this subcommand".into()))
        } else {
            Ok(&self.points)
        }
    }

    pub fn require_eps(&self) -> Result<&[f64]> {
        if self.eps_list.is_empty() {
            Err(Error::Config("eps_list is required for this subcommand".into()))
        } else {
            Ok(&self.eps_list)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_json_str(r#"{"coupling": [[1.0]], "rho": [25.132741228718345]}"#).unwrap();
        assert_eq!(c.grid, 512);
        assert_eq!(c.sigma_target().unwrap().len(), 1);
        assert!((c.sigma_target().unwrap()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_and_inconsistent() {
        assert!(RunConfig::from_json_str(r#"{"coupling": [[1.0]], "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"coupling": [[1.0, 2.0]]}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"coupling": [[1.0]], "rho": [1.0, 2.0]}"#).is_err());
        assert!(RunConfig::from_json_str(
            r#"{"coupling": [[1.0]], "n_points": 2, "points": [[0.1, 0.1]]}"#
        )
        .is_err());
    }
}
