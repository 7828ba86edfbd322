//! Experiment orchestration: configuration files, labeled RNG streams, the
//! command-line interface, and run artifacts (manifest, report, CSV).

mod config;
mod output;
mod rng;

pub mod cli;

pub use config::{
    DriverConfig, EnvironmentConfig, ExperimentConfig, Grids, InitialLaw, KernelConfig,
    ObserverKind, Params, RadiusSpec, RateEntry,
};
pub use output::{write_run, RunArtifacts};
pub use rng::{RngPolicy, StreamRole};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: &'static str, message: String },
    #[error("subcommand `{command}` needs config field `{field}`")]
    MissingField { command: &'static str, field: &'static str },
}
