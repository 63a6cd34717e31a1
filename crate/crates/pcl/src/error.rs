//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by tensor ops, data handling, and training loops.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor shapes; names both offenders.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Input outside an op's numeric domain (log of <= 0, division by zero,
    /// zero rows where a direction is required).
    #[error("domain error in {op} at index {index}: {detail}")]
    Domain {
        op: &'static str,
        index: usize,
        detail: String,
    },

    /// Reduction axis does not exist for the given rank.
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },

    /// API contract violation (caller bug rather than data problem).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite value rejected at tensor construction.
    #[error("non-finite value ({value}) at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    /// Training aborted on a non-finite loss or gradient.
    #[error("numeric abort at step {step}, tensor '{tensor}': {detail}")]
    NumericAbort {
        step: usize,
        tensor: String,
        detail: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: String, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration/usage problems,
    /// 3 for numeric aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericAbort { .. } | Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
