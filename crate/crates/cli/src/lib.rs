//! Experiment runner: dataset preparation, plaintext and encrypted training,
//! reconstruction attacks, noise sweeps, ranking evaluation and reports.

pub mod attack;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod output;
pub mod prepare;
pub mod report;
pub mod train;

pub use config::{ExperimentConfig, SchemeKind, Variant, DATA_ROOT_ENV, OUTPUT_ROOT_ENV};
pub use error::{CliError, Result, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, EXIT_OTHER};
