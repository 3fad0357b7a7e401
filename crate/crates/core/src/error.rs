use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} ({left} vs {right})")]
    DimensionMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{} has {left} columns but {} has {right}", x.display(), y.display())]
    ColumnMismatch {
        x: PathBuf,
        y: PathBuf,
        left: usize,
        right: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bandwidth must be a positive finite number, got {0}")]
    InvalidBandwidth(f64),

    #[error("need at least {needed} samples for {what}, got {got}")]
    InsufficientSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate variance: the studentizing scale is zero (constant data?)")]
    DegenerateVariance,

    #[error("number of permutations must be at least 1")]
    ZeroPermutations,

    #[error("invalid permutation draw: {0}")]
    InvalidDraw(String),

    #[error("matrix kind mismatch: {0}")]
    KindMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse {value:?} as a finite number")]
    ParseCell {
        path: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by incompatible data shapes rather than I/O or usage.
    pub fn is_shape_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. } | Error::ColumnMismatch { .. }
        )
    }
}
