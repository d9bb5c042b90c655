use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum LdmError {
    #[error("evaluation point {t} outside [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("curves do not share a common grid")]
    GridMismatch,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("warping values not strictly increasing at index {index}")]
    NotMonotone { index: usize },

    #[error("{module}: {source}")]
    Context {
        module: &'static str,
        #[source]
        source: Box<LdmError>,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LdmError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        LdmError::Argument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        LdmError::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LdmError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn context(self, module: &'static str) -> Self {
        LdmError::Context {
            module,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &LdmError {
        match self {
            LdmError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, LdmError>;
