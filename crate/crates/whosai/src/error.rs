//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any part of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed record in a line-oriented file (JSONL, CSV, config).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A precondition on input data was violated.
    #[error("{0}")]
    InvalidInput(String),

    /// Cosine distance is undefined for zero-norm vectors.
    #[error("zero-norm vector: {0}")]
    ZeroVector(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Gradient contained NaN or infinity; names the offending tensor.
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Bad configuration value or unknown config-file key.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
