//! Experiment harness: prediction tables, predictability study and navigation
//! evaluation over a speed corpus and its road graph.

pub mod chart;
pub mod config;
pub mod forecast;
pub mod navigation;
pub mod prediction;
pub mod report;
pub mod stages;

use std::path::{Path, PathBuf};

pub use config::{HarnessConfig, PredictorKind};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] roadcast::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 for usage errors, 2 for anything about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
