use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("parameter `{name}` = {value} is outside its domain: {reason}")]
    ParamDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Generic precondition failure (empty spectrum, zero count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("non-finite value in field `{field}` ({context})")]
    Divergence { field: &'static str, context: String },

    #[error("config error at `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("{path}: {source}")]
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
}
