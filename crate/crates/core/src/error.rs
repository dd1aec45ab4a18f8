use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, inference and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dataset has no groups")]
    EmptyDataset,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("index {index} out of range for {len} groups")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least {required} retained draws, got {available}")]
    InsufficientDraws { required: usize, available: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file {0} is empty")]
    EmptyFile(PathBuf),

    #[error("parse error at line {line}, column \"{column}\": {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: usize,
        found: usize,
        expected: usize,
    },

    #[error("missing column \"{0}\"")]
    MissingColumn(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical routines as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::RankDeficient => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
