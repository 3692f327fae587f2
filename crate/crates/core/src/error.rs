use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("non-finite reward {value} for sample {index}")]
    NonFiniteReward { index: usize, value: f64 },

    #[error("inverse kinematics failed: residual {residual:.3e} > tol {tol:.3e} after {iters} iterations")]
    IkFailed { residual: f64, tol: f64, iters: usize },

    #[error("skill library: {0}")]
    Library(String),

    #[error("duplicate skill id `{0}`")]
    DuplicateId(String),

    #[error("k = {k} exceeds library size {size}")]
    KTooLarge { k: usize, size: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            source,
        }
    }
}
