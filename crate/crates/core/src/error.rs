use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller broke a documented precondition (wrong node kind, mismatched widths, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown node: {0}")]
    Lookup(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Every pattern in a training split lacks a label.
    #[error("no supervised signal: {0}")]
    NoSupervision(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit status groups used by the command line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Usage = 2,
    Data = 3,
    Numeric = 4,
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

    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::InvalidArgument(_)
            | Error::InvalidShape(_)
            | Error::Contract(_)
            | Error::Config(_)
            | Error::CheckpointMismatch(_) => ExitClass::Usage,
            Error::NonFinite(_) | Error::Degenerate(_) => ExitClass::Numeric,
            Error::Lookup(_)
            | Error::UndefinedSimilarity(_)
            | Error::UndefinedMetric(_)
            | Error::NoSupervision(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_) => ExitClass::Data,
        }
    }
}
