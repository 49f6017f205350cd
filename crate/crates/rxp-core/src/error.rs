//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the detection/explanation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Layer sizes and activations do not describe a buildable network.
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    /// Input length does not match what the consumer expects.
    #[error("dimension mismatch: {0}")]
    DimensionError(String),

    /// An operation that needs at least one record got none.
    #[error("empty dataset")]
    EmptyDataset,

    /// The detector has no residual threshold yet.
    #[error("detector threshold has not been fitted")]
    DetectorNotFitted,

    /// Every relevance term vanished, so the attribution cannot be normalized.
    #[error("zero relevance mass: all attribution terms vanished")]
    ZeroRelevanceMass,

    /// The weighted regression system could not be solved.
    #[error("singular regression system; try more coalition samples")]
    SingularSystem,

    /// Exact enumeration was requested for too many features.
    #[error("too many features for exact enumeration: {got} > {max}")]
    TooManyFeatures { got: usize, max: usize },

    /// A caller-supplied value is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A ranking query cannot be scored.
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Paired differences are constant and non-zero; the t statistic diverges.
    #[error("degenerate variance: paired differences are constant")]
    DegenerateVariance,

    /// A data file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// Detection flagged nothing, so there is nothing to explain.
    #[error("empty evaluation pool: no detected faults and no false negatives")]
    EmptyEvaluationPool,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
