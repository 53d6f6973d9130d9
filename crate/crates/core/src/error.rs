use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write to {path} failed after {written} records: {source}")]
    PartialWrite {
        path: PathBuf,
        written: usize,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("corrupt or unsupported file format: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no perplexity threshold configured for source {0:?}")]
    MissingThreshold(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("completion request failed: {0}")]
    Completion(String),

    #[error("stage {stage:?} failed: {message}")]
    Stage { stage: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
