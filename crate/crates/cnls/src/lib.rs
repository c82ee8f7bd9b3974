//! Experiment driver for `cnls-core`: configuration files, sweeps over
//! masses and frequencies, JSON/CSV records, a manifest per run and an
//! on-disk cache.

pub mod config;
pub mod records;
pub mod run;
pub mod store;

pub use config::{Command, ConfigError, ExperimentConfig, RawConfig};
pub use run::{run, status, RunError, RunSummary};
