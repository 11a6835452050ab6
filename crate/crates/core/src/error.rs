//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by simulation, inference, and I/O entry points.
///
/// Numerical log-likelihoods never error on degenerate parameter values;
/// they return `f64::NEG_INFINITY` so samplers can reject and move on.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed a domain check (shape/rate positivity, σ < 1, …).
    #[error("invalid parameter {name}: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A kernel with η ≥ δ was passed where a stationary process is required.
    #[error("non-stationary kernel: eta = {eta} must be < delta = {delta}")]
    NonStationary { eta: f64, delta: f64 },

    /// Mismatched dimensions between related inputs.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Event times handed to a constructor were not sorted.
    #[error("unsorted event history in {direction} direction at index {index}")]
    UnsortedHistory {
        direction: &'static str,
        index: usize,
    },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failed to converge: {context} (error estimate {estimate:.3e})")]
    QuadratureFailure { context: &'static str, estimate: f64 },

    /// An operation that needs data received an empty dataset or split.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A malformed line in an edge-list file.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Malformed run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; artifacts written before the failure remain
    /// in `dir` for inspection.
    #[error("stage {stage} failed (partial artifacts in {dir}): {source}")]
    Stage {
        stage: &'static str,
        dir: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Helper for domain checks on scalar parameters.
    pub fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}

/// Checks that `value` is finite and strictly positive.
pub fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, value, "must be finite and > 0"))
    }
}

/// Checks that `value` is finite and non-negative.
pub fn require_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, value, "must be finite and >= 0"))
    }
}
