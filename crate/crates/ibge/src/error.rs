//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("intervention design entry at row {row}, column {col} is not 0/1")]
    NonBinary { row: usize, col: usize },

    #[error("graph contains a directed cycle involving vertices {0:?}")]
    Cycle(Vec<usize>),

    #[error("Cholesky factorization failed: pivot {pivot:e} at index {index} (matrix not positive definite)")]
    Cholesky { pivot: f64, index: usize },

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error("known intervention targets are required but absent from the design")]
    MissingTargets,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("mixing weights must be nonnegative and sum to 1 (got sum {0})")]
    WeightSum(f64),

    #[error("internal score drift: incremental {incremental} vs recomputed {recomputed}")]
    ScoreDrift { incremental: f64, recomputed: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
