use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row count {found} does not match {expected} rows in the first view")]
    RowCountMismatch { path: PathBuf, expected: usize, found: usize },

    #[error("{path}, row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },

    #[error("{path}, row {row}: label {label} out of range")]
    LabelOutOfRange { path: PathBuf, row: usize, label: i64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("zero-norm representation at row {0}; cosine similarity undefined")]
    ZeroNorm(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("training diverged at epoch {epoch} ({phase})")]
    Diverged { epoch: usize, phase: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
