use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("subject {subject}, measurement {index}: {reason}")]
    Measurement {
        subject: String,
        index: usize,
        reason: String,
    },

    #[error("invalid direction: {0}")]
    Direction(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::Format(_)
            | Error::Measurement { .. }
            | Error::Direction(_)
            | Error::Split(_)
            | Error::Shape(_)
            | Error::Checkpoint(_) => 3,
            Error::Domain(_) | Error::NonFinite(_) => 4,
        }
    }
}
