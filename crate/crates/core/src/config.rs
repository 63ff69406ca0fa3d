//! TOML run configuration.
//!
//! ```toml
//! [mesh]
//! level = 4            # required; n = 2^level squares per side
//! [space]
//! degree = 1
//! [time]
//! T = 1e-4
//! tau_rule = "paper"   # tau = 2^(2 - level); "fixed" uses `tau`
//! [initial]
//! kind = "gaussian"    # or "constant" with `value`
//! amplitude = 1e-3
//! ```
//!
//! Every section except `[mesh]` is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ConstantsSet, EstimatorOptions};
use crate::forms::PenaltyConfig;
use crate::mesh::Rectangle;
use crate::solver::KrylovSettings;
use crate::timestepper::{default_tau, InitialData, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mesh: MeshSection,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub constants: ConstantsSet,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub level: u32,
    /// `[x_min, x_max, y_min, y_max]`.
    #[serde(default = "unit_square")]
    pub domain: [f64; 4],
}

fn unit_square() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceSection {
    pub degree: usize,
}

impl Default for SpaceSection {
    fn default() -> Self {
        SpaceSection { degree: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauRule {
    /// `tau = 2^{2 - level}`.
    Paper,
    /// `tau` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Defaults to `fixed` when `tau` is given and `paper` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_rule: Option<TauRule>,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t_final: 1e-4,
            tau: None,
            tau_rule: None,
        }
    }
}

impl TimeSection {
    pub fn tau_for_level(&self, level: u32) -> Result<f64> {
        match (self.tau_rule, self.tau) {
            (Some(TauRule::Paper), Some(_)) => Err(Error::Config("tau_rule = \"paper\" conflicts with an explicit tau".into())),
            (Some(TauRule::Paper), None) | (None, None) => Ok(default_tau(level)),
            (Some(TauRule::Fixed), None) => Err(Error::Config("tau_rule = \"fixed\" requires tau".into())),
            (_, Some(tau)) => Ok(tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    /// Defaults to `10 k^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Defaults to `10 k^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Gaussian,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub value: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: InitialKind::Gaussian,
            amplitude: 1e-3,
            center: [0.5, 0.5],
            width: 1e-2,
            value: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub grid_samples: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("output"),
            snapshot_times: Vec::new(),
            grid_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub e_minus1_for_k1: bool,
    pub linf_refinement: u32,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorOptions::default();
        EstimatorSection {
            e_minus1_for_k1: d.e_minus1_for_k1,
            linf_refinement: d.linf_refinement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = KrylovSettings::default();
        SolverSection {
            relative_tolerance: d.relative_tolerance,
            max_iterations: d.max_iterations,
            restart: d.restart,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Run configuration on the configured level.
    pub fn run_config(&self) -> Result<RunConfig> {
        self.run_config_for(self.mesh.level, self.space.degree)
    }

    /// Run configuration with the level and degree replaced.
    pub fn run_config_for(&self, level: u32, degree: usize) -> Result<RunConfig> {
        let [x0, x1, y0, y1] = self.mesh.domain;
        let defaults = PenaltyConfig::for_degree(degree);
        let s = &self.solver;
        if !(s.relative_tolerance > 0.0) || s.max_iterations == 0 || s.restart == 0 {
            return Err(Error::Config("solver settings must be positive".into()));
        }
        if self.output.grid_samples < 2 {
            return Err(Error::Config("grid_samples must be at least 2".into()));
        }
        let cfg = RunConfig {
            level,
            degree,
            rectangle: Rectangle::new(x0, x1, y0, y1).map_err(|e| Error::Config(e.to_string()))?,
            t_final: self.time.t_final,
            tau: self.time.tau_for_level(level)?,
            penalty: PenaltyConfig {
                eta: self.penalty.eta.unwrap_or(defaults.eta),
                sigma: self.penalty.sigma.unwrap_or(defaults.sigma),
                eps_w: self.penalty.eps_w.unwrap_or(defaults.eps_w),
            },
            constants: self.constants,
            initial: match self.initial.kind {
                InitialKind::Gaussian => InitialData::Gaussian {
                    amplitude: self.initial.amplitude,
                    center: self.initial.center,
                    width: self.initial.width,
                },
                InitialKind::Constant => InitialData::Constant {
                    value: self.initial.value,
                },
            },
            snapshot_times: self.output.snapshot_times.clone(),
            estimators: EstimatorOptions {
                e_minus1_for_k1: self.estimators.e_minus1_for_k1,
                linf_refinement: self.estimators.linf_refinement,
            },
            krylov: KrylovSettings {
                relative_tolerance: s.relative_tolerance,
                max_iterations: s.max_iterations,
                restart: s.restart,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully resolved configuration: re-parsing it reproduces `run_config`.
    pub fn effective(&self) -> Result<ConfigFile> {
        let run = self.run_config()?;
        let mut out = self.clone();
        out.time.tau = Some(run.tau);
        out.time.tau_rule = Some(TauRule::Fixed);
        out.penalty = PenaltySection {
            eta: Some(run.penalty.eta),
            sigma: Some(run.penalty.sigma),
            eps_w: Some(run.penalty.eps_w),
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ConfigFile::parse("[mesh]\nlevel = 4\n").unwrap();
        let r = c.run_config().unwrap();
        assert_eq!(r.degree, 1);
        assert_eq!(r.t_final, 1e-4);
        assert_eq!(r.tau, 0.25);
        assert_eq!(r.penalty.eta, 10.0);
        assert_eq!(r.constants, ConstantsSet::default());
    }

    #[test]
    fn missing_mesh_is_named() {
        let e = ConfigFile::parse("[space]\ndegree = 2\n").unwrap_err();
        assert!(e.to_string().contains("mesh"), "{e}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse("[mesh]\nlevel = 4\ncolour = 1\n").is_err());
        assert!(ConfigFile::parse("[mesh]\nlevel = 4\n[bogus]\n").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let text = "[mesh]\nlevel = 3\n[space]\ndegree = 2\n[initial]\namplitude = 1000.0\n[output]\nsnapshot_times = [0.0, 5e-5]\n";
        let c = ConfigFile::parse(text).unwrap();
        let eff = c.effective().unwrap();
        let back = ConfigFile::parse(&eff.to_toml()).unwrap();
        assert_eq!(back, eff);
        assert_eq!(back.run_config().unwrap(), c.run_config().unwrap());
    }

    #[test]
    fn tau_rules() {
        let c = ConfigFile::parse("[mesh]\nlevel = 3\n[time]\ntau = 1e-5\n").unwrap();
        assert_eq!(c.run_config().unwrap().tau, 1e-5);
        let c = ConfigFile::parse("[mesh]\nlevel = 3\n[time]\ntau_rule = \"fixed\"\n").unwrap();
        assert!(c.run_config().is_err());
        let c = ConfigFile::parse("[mesh]\nlevel = 3\n[time]\nT = -1.0\n").unwrap();
        assert!(c.run_config().is_err());
    }
}
