use thiserror::Error;

/// Errors raised by samplers, spectral analytics and rank estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("matrix is not symmetric: |x[{row},{col}] - x[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("model index {index} out of range for a spectrum of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate model M_{0}: residual variance estimate is zero")]
    DegenerateModel(usize),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("invalid config: {key}: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
