//! Experiment harness: JSON configuration, Monte-Carlo and analytic runs,
//! CSV/JSON emitters and the `uepmm` command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, Format};
pub use experiment::{run_analytic, run_decode_probs, run_monte_carlo, Analytic, MonteCarlo, TrialPoint, TrialRecord};
pub use output::{emit, format_value, write_records, Record};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
