use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad format: {0}")]
    Format(String),

    #[error("truncated {what}: expected {expected} bytes, found {actual}")]
    Truncated {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("digest mismatch for {what}: expected {expected}, found {actual}")]
    Digest {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("freeze violation: {0}")]
    Freeze(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
