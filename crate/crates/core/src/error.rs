use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the model or the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Panel doubling ran out of budget before meeting the tolerance.
    #[error("quadrature did not converge for {what} after {panels} panels per axis (last change {last_change:e})")]
    Quadrature {
        what: String,
        panels: usize,
        last_change: f64,
    },

    #[error("index {index} out of range (horizon {horizon})")]
    Index { index: usize, horizon: usize },

    /// `1 + X_n / N^H <= 0`: the next price would not be positive.
    #[error("non-positive price at period {n} (growth factor {factor})")]
    NonPositivePrice { n: usize, factor: f64 },

    #[error("horizon {n} too large for exhaustive enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid sign {value} at position {position}")]
    InvalidSign { position: usize, value: i64 },

    #[error("kernel cache rejected: {0}")]
    Cache(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (quadrature, price positivity)
    /// rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::NonPositivePrice { .. } | Error::Degenerate(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
