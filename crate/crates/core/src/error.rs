use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("only one class present")]
    SingleClass,
    #[error("unregularized fit is unbounded (separable data)")]
    Unbounded,
    #[error("budget constraint requires per-feature costs")]
    MissingCosts,
    #[error("constraint is infeasible even for the empty support")]
    Infeasible,
    #[error("problem too large for exhaustive enumeration: {n} features (max {max})")]
    TooLarge { n: usize, max: usize },
    #[error("{minority} minority examples cannot be stratified into {folds} folds")]
    FoldTooSmall { minority: usize, folds: usize },
    #[error("CBF parse error at line {line}: {msg}")]
    Cbf { line: usize, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
