//! Error type shared across the estimation modules.

use thiserror::Error;

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by estimation, selection and data-handling routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not match what an operation expects.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Invalid scalar or configuration value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every observation received zero kernel weight at the evaluation point.
    #[error("empty neighborhood at evaluation point (bandwidth {bandwidth} too small)")]
    EmptyNeighborhood { bandwidth: f64 },

    /// Density or another scale factor degenerated to a non-positive value.
    #[error("degenerate evaluation point: {0}")]
    DegeneratePoint(String),

    /// An estimate violated a structural diagnostic (e.g. covariance PSD check).
    #[error("estimate diagnostics failed: {0}")]
    Diagnostics(String),

    /// Bandwidth selection could not rank any candidate.
    #[error("bandwidth selection failed: {0}")]
    SelectionFailure(String),

    /// Malformed input file content.
    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    /// Series could not be joined on their time index.
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(csv::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::InvalidArgument(format!("csv error: {other:?}")),
            }
        } else {
            Error::Csv(e)
        }
    }
}

impl Error {
    /// Stable machine-readable category slug, used by the CLI error protocol.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::EmptyNeighborhood { .. } => "empty-neighborhood",
            Error::DegeneratePoint(_) => "degenerate-point",
            Error::Diagnostics(_) => "diagnostics",
            Error::SelectionFailure(_) => "selection-failure",
            Error::Parse { .. } => "parse",
            Error::Alignment(_) => "alignment",
            Error::Io(_) => "io",
            Error::Csv(_) => "parse",
        }
    }
}
