//! Experiment configuration files.
//!
//! A config is a JSON object with a schema version, an output directory and
//! one experiment block keyed by its kind:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "output_dir": "out/fig2",
//!   "experiment": { "fig2": { "beta_e": 0.6931471805599453, "d": [1, 2, 5, 20] } }
//! }
//! ```
//!
//! Energies are given as products with the cold-bath inverse temperature
//! (`beta_e` is `βE`), so `β = 1` throughout. Omitted fields take defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub experiment: Experiment,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig2(Fig2Params),
    Fig3(Fig3Params),
    CoolingCoherent(CoherentParams),
    CoolingIncoherent(IncoherentParams),
    BetaSwapSweep(SweepParams),
    Validate(ValidateParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Fig2(_) => "fig2",
            Experiment::Fig3(_) => "fig3",
            Experiment::CoolingCoherent(_) => "cooling-coherent",
            Experiment::CoolingIncoherent(_) => "cooling-incoherent",
            Experiment::BetaSwapSweep(_) => "beta-swap-sweep",
            Experiment::Validate(_) => "validate",
        }
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k == self.points - 1 {
                    self.stop
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }

    fn check(&self, path: &str) -> Result<()> {
        if self.points == 0 {
            return Err(CliError::config(format!("{path}.points"), "grid must have at least one point"));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config(path, "grid bounds must be finite"));
        }
        if self.stop < self.start {
            return Err(CliError::config(format!("{path}.stop"), "must not be below start"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Params {
    pub beta_e: f64,
    pub beta_w: Grid,
    pub d: Vec<usize>,
}

impl Default for Fig2Params {
    fn default() -> Self {
        Self {
            beta_e: std::f64::consts::LN_2,
            beta_w: Grid {
                start: 0.015,
                stop: 3.0,
                points: 200,
            },
            d: vec![1, 2, 5, 20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Params {
    pub gamma: f64,
    pub depth: usize,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            depth: thermoproc::reachable::DEFAULT_DEPTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentParams {
    pub gamma: f64,
    pub rounds: usize,
    pub d: Vec<usize>,
}

impl Default for CoherentParams {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            rounds: 20,
            d: vec![1, 2, 4, 8],
        }
    }
}

/// `beta_hot` is the hot-bath inverse temperature in units of the cold one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncoherentParams {
    pub beta_e: f64,
    pub beta_script_e: f64,
    pub beta_hot: f64,
    pub rounds: usize,
    pub d: Vec<usize>,
}

impl Default for IncoherentParams {
    fn default() -> Self {
        Self {
            beta_e: 1.0,
            beta_script_e: 2.0,
            beta_hot: 0.2,
            rounds: 50,
            d: vec![1, 2, 4, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub gamma: Vec<f64>,
    pub p0: Vec<f64>,
    pub d_max: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            gamma: vec![0.55, 0.65, 0.75, 0.85, 0.95],
            p0: vec![0.0, 0.25, 0.5, 0.9],
            d_max: 12,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    pub only: Option<String>,
    pub tolerance: Option<f64>,
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be finite and positive, got {v}")))
    }
}

fn check_gamma(path: &str, v: f64) -> Result<()> {
    if v > 0.5 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must lie in (0.5, 1), got {v}")))
    }
}

fn check_dims(path: &str, ds: &[usize], max: usize) -> Result<()> {
    if ds.is_empty() {
        return Err(CliError::config(path, "list must not be empty"));
    }
    for (k, &d) in ds.iter().enumerate() {
        if d == 0 || d > max {
            return Err(CliError::config(format!("{path}[{k}]"), format!("must lie in 1..={max}, got {d}")));
        }
    }
    Ok(())
}

fn check_rounds(path: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(CliError::config(path, "at least one round is required"))
    } else {
        Ok(())
    }
}

/// Largest memory a cooling run may simulate (`d²` steps per round).
const MAX_SIM_D: usize = 64;

impl ExperimentConfig {
    pub fn new(experiment: Experiment, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output_dir: output_dir.into(),
            experiment,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "<root>".into() } else { path }, e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Compact JSON, used as the config echo in outputs.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        match &self.experiment {
            Experiment::Fig2(p) => {
                check_positive("experiment.fig2.beta_e", p.beta_e)?;
                p.beta_w.check("experiment.fig2.beta_w")?;
                check_positive("experiment.fig2.beta_w.start", p.beta_w.start)?;
                check_dims("experiment.fig2.d", &p.d, thermoproc::combinatorics::MAX_FLOAT_D)
            }
            Experiment::Fig3(p) => {
                check_gamma("experiment.fig3.gamma", p.gamma)?;
                if p.depth == 0 || p.depth > 16 {
                    return Err(CliError::config("experiment.fig3.depth", "must lie in 1..=16"));
                }
                Ok(())
            }
            Experiment::CoolingCoherent(p) => {
                check_gamma("experiment.cooling-coherent.gamma", p.gamma)?;
                check_rounds("experiment.cooling-coherent.rounds", p.rounds)?;
                check_dims("experiment.cooling-coherent.d", &p.d, MAX_SIM_D)
            }
            Experiment::CoolingIncoherent(p) => {
                let base = "experiment.cooling-incoherent";
                check_positive(&format!("{base}.beta_e"), p.beta_e)?;
                if !(p.beta_script_e > p.beta_e && p.beta_script_e.is_finite()) {
                    return Err(CliError::config(format!("{base}.beta_script_e"), "must exceed beta_e"));
                }
                if !(p.beta_hot >= 0.0 && p.beta_hot < 1.0) {
                    return Err(CliError::config(format!("{base}.beta_hot"), "must lie in [0, 1)"));
                }
                check_rounds(&format!("{base}.rounds"), p.rounds)?;
                check_dims(&format!("{base}.d"), &p.d, MAX_SIM_D)
            }
            Experiment::BetaSwapSweep(p) => {
                let base = "experiment.beta-swap-sweep";
                if p.gamma.is_empty() || p.p0.is_empty() {
                    return Err(CliError::config(base, "gamma and p0 lists must not be empty"));
                }
                for (k, &g) in p.gamma.iter().enumerate() {
                    check_gamma(&format!("{base}.gamma[{k}]"), g)?;
                }
                for (k, &v) in p.p0.iter().enumerate() {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(CliError::config(format!("{base}.p0[{k}]"), "must lie in [0, 1]"));
                    }
                }
                if p.d_max == 0 || p.d_max > MAX_SIM_D {
                    return Err(CliError::config(format!("{base}.d_max"), format!("must lie in 1..={MAX_SIM_D}")));
                }
                Ok(())
            }
            Experiment::Validate(p) => {
                if let Some(only) = &p.only {
                    if !crate::validation::MODULES.contains(&only.as_str()) {
                        return Err(CliError::config(
                            "experiment.validate.only",
                            format!("unknown module `{only}`, expected one of {:?}", crate::validation::MODULES),
                        ));
                    }
                }
                if let Some(t) = p.tolerance {
                    if !(t >= 0.0 && t.is_finite()) {
                        return Err(CliError::config("experiment.validate.tolerance", "must be finite and non-negative"));
                    }
                }
                Ok(())
            }
        }
    }
}
