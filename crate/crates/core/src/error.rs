use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sampling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A divergence is infinite because the reference density vanishes
    /// where the other one does not.
    #[error("divergence is infinite: reference density vanishes at grid index {index}")]
    InfiniteDivergence { index: usize },

    /// A run configuration is not usable for the requested operation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Semantic validation of an experiment config; every violation is listed.
    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("failed to parse {what} at line {line}, column {column}: {message}")]
    Parse {
        what: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dataset error in {path} (line {line}): {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A solver hit a numerical guard (positivity floor, non-finite value).
    #[error("solver aborted: {0}")]
    SolverAbort(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
