//! Config-driven experiment runner over `(trace family, lambda, seed)`
//! grids. See the README for the config grammar and output schemas.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{ExperimentConfig, Mode};
pub use error::{CliError, ConfigError};
pub use experiment::{run_config_file, run_experiment, RunOptions, RunSummary};
