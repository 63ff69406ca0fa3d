use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} failed to converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value in {field} after step {step}")]
    NonFinite { field: &'static str, step: usize },

    #[error("index {index} out of range (length {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("{0}")]
    Eoc(String),

    #[error("empty estimator series")]
    EmptySeries,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors that stem from the numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Solver { .. } | Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
