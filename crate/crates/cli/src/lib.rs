//! Experiment driver: JSON configs in, JSON and CSV reports out.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use report::{write_artifacts, ExperimentReport};
pub use runner::run_experiment;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] htl_core::HtlError),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
