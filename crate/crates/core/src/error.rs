use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("need at least two delimiting curves")]
    TooFewCurves,

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("curve has {found} values but grid has {expected} points")]
    LengthMismatch { expected: usize, found: usize },

    #[error("curve contains a non-finite value at grid point {0}")]
    NonFinite(usize),

    #[error("locality neighborhood too small: beta = {beta} keeps {kept} of {total} symmetrized curves")]
    NeighborhoodTooSmall { beta: f64, kept: usize, total: usize },

    #[error("trim level removes entire sample (alpha = {alpha}, max depth = {max_depth})")]
    TrimRemovesAll { alpha: f64, max_depth: f64 },

    #[error("window exceeds history at origin {origin}: {reason}")]
    WindowExceedsHistory { origin: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid hierarchy: {0}")]
    Hierarchy(String),

    #[error("singular reconciliation system: {0}")]
    Singular(String),

    #[error("cannot construct size outlier: {0}")]
    CannotConstructOutlier(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
