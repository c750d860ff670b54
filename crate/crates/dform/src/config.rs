//! Run configuration, loadable from TOML and overridable from the command
//! line. Every report echoes the configuration it ran with.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of grids in refinement studies.
    pub levels: usize,
    /// Half-width of the centered coordinate box.
    pub half_width: f64,
    pub min_rate: f64,
    /// Residuals below this count as roundoff in refinement studies.
    pub roundoff_floor: f64,
    pub algebra_checks: usize,
    pub algebra_tol: f64,
    /// Relative stopping tolerance of the least-squares solver.
    pub lsqr_tol: f64,
    /// Absolute singular-value threshold for Killing fields; derived from
    /// the grid when absent.
    pub kill_tol: Option<f64>,
    /// Compatibility residual accepted by `check-sv`.
    pub sv_tol: f64,
    /// Killing traction integrals accepted by `traction-check`.
    pub traction_tol: f64,
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            levels: 3,
            half_width: 0.8,
            min_rate: 1.8,
            roundoff_floor: 1e-9,
            algebra_checks: 2000,
            algebra_tol: 1e-11,
            lsqr_tol: 1e-12,
            kill_tol: None,
            sv_tol: 1e-2,
            traction_tol: 1e-2,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("half_width", self.half_width),
            ("min_rate", self.min_rate),
            ("roundoff_floor", self.roundoff_floor),
            ("algebra_tol", self.algebra_tol),
            ("lsqr_tol", self.lsqr_tol),
            ("sv_tol", self.sv_tol),
            ("traction_tol", self.traction_tol),
            ("kill_tol", self.kill_tol.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be at least 2, got {}", self.levels)));
        }
        Ok(())
    }
}
