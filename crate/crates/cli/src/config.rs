//! Run configuration: one TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use helfrich_core::minimize::GradientMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub mesh: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub h0: f64,
    /// Target area; the input mesh's own area when absent.
    pub area0: Option<f64>,
    /// Target enclosed volume; the input mesh's own volume when absent.
    pub vol0: Option<f64>,
    /// Random bump applied to the input before the command runs.
    pub perturb: Option<PerturbConfig>,
    pub analyze: AnalyzeConfig,
    pub correct: CorrectConfig,
    pub minimize: MinimizeConfig,
    pub replace: ReplaceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            mesh: None,
            out: PathBuf::from("out"),
            seed: 0,
            h0: 0.0,
            area0: None,
            vol0: None,
            perturb: None,
            analyze: AnalyzeConfig::default(),
            correct: CorrectConfig::default(),
            minimize: MinimizeConfig::default(),
            replace: ReplaceConfig::default(),
        }
    }
}

/// Normal bump of the given amplitude, centred at a vertex drawn from the
/// seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub amplitude: f64,
    /// Bump radius relative to `√(area / 4π)`.
    pub radius: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            amplitude: 0.05,
            radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Grid resolution of the winding-number volume.
    pub grid: usize,
    pub eps0: f64,
    pub rho: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            grid: 64,
            eps0: 1.0,
            rho: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub t_max: f64,
    pub candidates: usize,
    pub bump_radius: Option<f64>,
}

impl Default for CorrectConfig {
    fn default() -> Self {
        CorrectConfig {
            tol: 1e-10,
            max_iter: 20,
            t_max: 0.5,
            candidates: 64,
            bump_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub max_steps: usize,
    pub step_tol: f64,
    pub grad_tol: f64,
    pub gradient: GradientMode,
    pub gauss_weight: f64,
    pub max_vertex_step: f64,
    pub constraint_tol: f64,
    pub step_growth: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_steps: 300,
            step_tol: 1e-9,
            grad_tol: 1e-6,
            gradient: GradientMode::Fd,
            gauss_weight: 0.0,
            max_vertex_step: 0.01,
            constraint_tol: 1e-8,
            step_growth: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaceConfig {
    pub center: Option<[f64; 3]>,
    /// Search radius: the disc radius is picked in `(ρ/2, 3ρ/4)`.
    pub rho: f64,
    /// Fixed disc radius, skipping the search.
    pub sigma: Option<f64>,
    pub grid_n: usize,
    pub samples: usize,
    /// Restore the original area and volume away from the patch afterwards.
    pub correct: bool,
}

impl Default for ReplaceConfig {
    fn default() -> Self {
        ReplaceConfig {
            center: None,
            rho: 0.5,
            sigma: None,
            grid_n: 65,
            samples: 128,
            correct: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.mesh.is_none() {
            return Err(CliError::Config("no input mesh given".into()));
        }
        if !self.h0.is_finite() {
            return Err(CliError::Config("h0 must be finite".into()));
        }
        if let Some(a) = self.area0 {
            positive("area0", a)?;
        }
        if let Some(v) = self.vol0 {
            if !(v.is_finite() && v != 0.0) {
                return Err(CliError::Config(format!("vol0 must be finite and nonzero, got {v}")));
            }
        }
        if let Some(p) = &self.perturb {
            if !p.amplitude.is_finite() {
                return Err(CliError::Config("perturb.amplitude must be finite".into()));
            }
            positive("perturb.radius", p.radius)?;
        }
        if self.analyze.grid < 32 {
            return Err(CliError::Config("analyze.grid must be at least 32".into()));
        }
        positive("analyze.eps0", self.analyze.eps0)?;
        positive("analyze.rho", self.analyze.rho)?;
        positive("correct.tol", self.correct.tol)?;
        positive("correct.t_max", self.correct.t_max)?;
        if self.correct.candidates < 2 || self.correct.max_iter == 0 {
            return Err(CliError::Config("correct needs at least 2 candidates and 1 iteration".into()));
        }
        if let Some(r) = self.correct.bump_radius {
            positive("correct.bump_radius", r)?;
        }
        let m = &self.minimize;
        positive("minimize.step_tol", m.step_tol)?;
        positive("minimize.grad_tol", m.grad_tol)?;
        positive("minimize.max_vertex_step", m.max_vertex_step)?;
        positive("minimize.constraint_tol", m.constraint_tol)?;
        positive("minimize.step_growth", m.step_growth)?;
        if !m.gauss_weight.is_finite() {
            return Err(CliError::Config("minimize.gauss_weight must be finite".into()));
        }
        positive("replace.rho", self.replace.rho)?;
        if let Some(s) = self.replace.sigma {
            positive("replace.sigma", s)?;
        }
        if self.replace.grid_n < 33 || self.replace.samples < 64 {
            return Err(CliError::Config("replace needs grid_n >= 33 and samples >= 64".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.mesh = Some(PathBuf::from("in.off"));
        c.area0 = Some(12.5);
        c.perturb = Some(PerturbConfig::default());
        c.replace.center = Some([0.0, 0.1, 1.0]);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml("mesh = \"a.off\"\nh0 = 1.5\n[minimize]\nmax_steps = 7\n").unwrap();
        assert_eq!(c.h0, 1.5);
        assert_eq!(c.minimize.max_steps, 7);
        assert_eq!(c.minimize.grad_tol, 1e-6);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_tolerances_are_rejected() {
        assert!(RunConfig::from_toml("mesh = \"a.off\"\nbogus = 1\n").is_err());
        let c = RunConfig::from_toml("mesh = \"a.off\"\n[correct]\ntol = -1.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("schema = 2\nmesh = \"a.off\"\n").unwrap();
        assert!(c.validate().is_err());
    }
}
