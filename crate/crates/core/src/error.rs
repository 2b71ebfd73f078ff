use thiserror::Error;

/// Errors raised by the matrix kernel and everything built on top of it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is numerically singular")]
    Singular,

    #[error("matrix is not stable: spectral abscissa {abscissa}")]
    Unstable { abscissa: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("series extraction failed: {0}")]
    Extraction(String),

    #[error("leading-order denominator vanishes (coefficient {coefficient:e}, tolerance {tolerance:e})")]
    DivisionOrder { coefficient: f64, tolerance: f64 },

    #[error("block structure violated: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
