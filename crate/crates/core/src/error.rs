use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EmbedError>;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("perplexity calibration failed at point {point}: {reason}")]
    Calibration { point: usize, reason: String },

    #[error("objective evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("{0} is not supported for this operation")]
    Unsupported(String),

    #[error("parse error in {path} at row {row}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EmbedError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EmbedError::Io {
            path: path.into(),
            source,
        }
    }
}
