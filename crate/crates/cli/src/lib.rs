//! Experiment driver for the `eee-bundle` command: configuration handling,
//! subcommand implementations and CSV output.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use commands::{execute, CommandOutput};
pub use config::{Command, ExperimentConfig};
pub use csvio::{CsvTable, ResultRow};
pub use error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EEE_BUNDLE_OUT";
