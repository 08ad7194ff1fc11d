//! Crate-wide error type.
//!
//! Domain errors (invalid probabilities, levels, ranks, sample sizes) are
//! recoverable and carry enough context to name the offending value;
//! configuration errors additionally name the field so a CLI can report it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must lie in [0, 1], got {value}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("level must lie in [0, 1], got {0}")]
    InvalidLevel(f64),

    #[error("batch spread delta must lie in [0, 1/2), got {0}")]
    InvalidDelta(f64),

    #[error("slack value must lie in [0, 1), got {0}")]
    InvalidSlack(f64),

    #[error("batch count is undefined for alpha = {0}; alpha must be positive")]
    UndefinedBatchCount(f64),

    #[error("need at least {required} observations, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("order-statistic rank r = {r} must satisfy 1 <= r <= n/2 for n = {n}")]
    InvalidRank { r: usize, n: usize },

    #[error("scale parameter must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("{what} is NaN")]
    NotANumber { what: &'static str },

    #[error("{what} must be finite, got {value}")]
    NotFinite { what: &'static str, value: f64 },

    #[error("batch count must be at least 1")]
    ZeroBatches,

    #[error("batch count for alpha = {alpha}, delta = {delta} exceeds the supported range")]
    BatchCountOverflow { alpha: f64, delta: f64 },

    #[error("interval endpoints out of order: lo = {lo} > hi = {hi}")]
    EndpointsOutOfOrder { lo: f64, hi: f64 },

    #[error("model list is empty")]
    EmptyModelList,

    #[error("level grid has no entry at or above alpha = {alpha}")]
    EmptyLevelGrid { alpha: f64 },

    #[error("replication count must be positive")]
    ZeroReps,

    #[error("unknown {kind} '{name}'; known {kind}s: {known}")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid config field '{field}': {message}")]
    Config { field: String, message: String },

    #[error("enumeration has {outcomes} outcomes, exceeding the limit of {limit}")]
    EnumerationTooLarge { outcomes: u128, limit: u128 },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    #[error(
        "oracle self-check failed at cell [{cell}]: MC value {mc} has 99.9% binomial interval \
         [{lo}, {hi}], which misses the exact value {exact}"
    )]
    OracleMismatch {
        cell: String,
        mc: f64,
        exact: f64,
        lo: f64,
        hi: f64,
    },
}

impl Error {
    /// Helper for configuration errors; keeps call sites short.
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors that indicate a bad configuration or unknown registry
    /// name (the CLI maps these to exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::UnknownName { .. })
    }

    /// True when a Monte Carlo estimate contradicted a closed-form oracle
    /// (the CLI maps these to exit code 1).
    pub fn is_oracle_violation(&self) -> bool {
        matches!(self, Error::OracleMismatch { .. })
    }
}
