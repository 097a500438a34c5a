//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid label {0}: must be +1 or -1")]
    InvalidLabel(f64),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("model has no hidden layer; features are undefined")]
    NoHiddenLayer,

    #[error("selection size {n_s} too large: need 2*n_s <= {n_u} unlabeled samples")]
    SelectionTooLarge { n_s: usize, n_u: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at {context}")]
    NumericAbort { context: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset parts overlap: {0}")]
    Overlap(String),

    #[error("infeasible dataset counts: {0}")]
    InfeasibleCounts(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 numeric abort, 3 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericAbort { .. } => 2,
            Error::Io(_) | Error::Json(_) => 3,
            _ => 1,
        }
    }
}
