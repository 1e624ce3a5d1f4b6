//! Experiment runner and validation suite built on `thermoproc`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod validation;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::{build_outputs, run_experiment};
pub use validation::ValidationReport;
