//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, inference, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv ingestion: {0}")]
    Csv(String),

    #[error("missing column '{0}' in header")]
    MissingColumn(String),

    #[error("row {row}: non-numeric value '{value}' in column '{column}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: treatment indicator must be 0 or 1, got '{value}'")]
    BadTreatment { row: usize, value: String },

    #[error("empty file: no data rows")]
    EmptyFile,

    #[error("sample must contain at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("row {row}: non-finite value in column '{column}'")]
    NonFinite { row: usize, column: String },

    #[error("covariate dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arm {0} has no observations")]
    EmptyArm(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("separation or collinear basis — increase ridge")]
    SingularSystem,

    #[error("non-finite likelihood during fit")]
    NonFiniteLikelihood,

    #[error("all candidate degrees were skipped (K >= n for every candidate)")]
    NoViableDegree,

    #[error("subsample redraw limit exceeded (pathological arm imbalance)")]
    RedrawLimit,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
