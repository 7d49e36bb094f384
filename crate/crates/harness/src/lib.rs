//! Config-driven experiments on top of `theta-parareal`.
//!
//! A run reads a TOML [`config::ExperimentConfig`], assembles the problem,
//! propagators and weight strategy ([`experiment`]), runs the engine and
//! writes the artifacts described in [`artifacts`]. [`sweep`] repeats runs
//! over a cross product of overrides and [`stability`] writes stability
//! grids.

pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod report;
pub mod stability;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(#[from] theta_parareal::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status: 2 for configuration, 3 for numerical and 1 for
    /// I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io { context: context.into(), source }
    }
}

pub use artifacts::{write_run, RunSummary};
pub use config::ExperimentConfig;
pub use experiment::{assemble, execute, Experiment, Outcome};
