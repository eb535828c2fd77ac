use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the benchmarking toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input file not found: {0}")]
    MissingFile(PathBuf),

    #[error("mapped column `{0}` not present in header")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` (row {row})")]
    NonNumeric { column: String, row: usize, value: String },

    #[error("categorical column `{column}` contains {value}, expected 0 or 1")]
    NotCategorical { column: String, value: f64 },

    #[error("mapped column `{0}` has no values")]
    EmptyColumn(String),

    #[error("fewer than 2 complete rows ({0} usable)")]
    TooFewRows(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Clayton inapplicable: Kendall tau {0:.6} shows no positive dependence")]
    ClaytonInapplicable(f64),

    #[error("degenerate dependence: Kendall tau equals 1")]
    DegenerateDependence,

    #[error("evaluation at hyperbola pole (t = {0})")]
    HyperbolaPole(f64),

    #[error("filter search degenerate; relax min_keep_fraction")]
    DegenerateSearch,

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("no relevant vectors: every basis was pruned")]
    NoRelevantVectors,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("IRLS failed to improve the penalized likelihood after {0} step halvings")]
    IrlsDivergence(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
