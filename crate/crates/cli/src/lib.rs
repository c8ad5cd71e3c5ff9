//! Configuration and orchestration behind the `kickedtop` binary.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use run::{run, CliError, RunReport};
