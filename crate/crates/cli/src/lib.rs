//! Experiment harness: TOML sweep configs, CSV outputs and field snapshots.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod run;
pub mod snapshot;

pub use config::{Config, OneOrMany, RunPoint};
pub use run::{run_experiment, run_point, run_sweep, RunOptions, RunRecord};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Solver(#[from] ibmg_core::IbmgError),
}

/// Thread cap from `IBMG_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("IBMG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&t| t > 0)
}
