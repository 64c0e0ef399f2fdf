//! Experiment runner for progressive self-paced distillation: k-fold runs,
//! the four-arm ablation grid, learning-curve export and synthetic data
//! generation. The `pspd` binary is a thin wrapper around these functions.

pub mod config;
pub mod curves;
pub mod error;
pub mod gendata;
pub mod run;

pub use config::{config_hash, load_config, ExperimentConfig, LoadedConfig, Overrides};
pub use curves::{emit_curves, write_curves};
pub use error::{CliError, CliResult};
pub use gendata::generate_to_csv;
pub use run::{run_ablation, run_experiment, AblationOutcome, ExperimentOutcome, RunOptions};
