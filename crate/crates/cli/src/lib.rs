//! Command-line driver for composite-function surrogates: experiment
//! configuration, builtin and external evaluators, and artifact output.

pub mod commands;
pub mod config;
pub mod error;
pub mod external;
pub mod output;
pub mod problems;

pub use commands::{cmd_run, cmd_sweep, RunManifest, SweepManifest};
pub use config::{ConfigFile, ExperimentConfig};
pub use error::{CliError, Result};
