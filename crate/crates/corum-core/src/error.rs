//! Error types for model construction, normalization, and numeric routines.

use thiserror::Error;

/// Errors produced by the core model and probability routines.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A model needs at least two items.
    #[error("model needs at least 2 items, got {n}")]
    TooFewItems { n: usize },

    /// Mean vector and covariance matrix dimensions disagree.
    #[error("dimension mismatch: mu has length {mu_len}, sigma is {rows}x{cols}")]
    DimensionMismatch {
        mu_len: usize,
        rows: usize,
        cols: usize,
    },

    /// The covariance matrix is not symmetric within tolerance.
    #[error("covariance is not symmetric: max |sigma[i][j] - sigma[j][i]| = {max_asymmetry:e}")]
    AsymmetricCovariance { max_asymmetry: f64 },

    /// The covariance has an eigenvalue below the allowed negativity floor.
    #[error("covariance is indefinite: eigenvalue {eigenvalue:e} below floor {floor:e}")]
    IndefiniteCovariance { eigenvalue: f64, floor: f64 },

    /// The covariance is degenerate in a direction where variation is required.
    #[error("degenerate covariance: {detail}")]
    DegenerateCovariance { detail: String },

    /// An operation that requires a normalized model received an unnormalized one.
    #[error("operation requires a normalized model: {detail}")]
    NotNormalized { detail: String },

    /// An item index is out of range for the model.
    #[error("item index {item} out of range for {n} items")]
    ItemOutOfRange { item: usize, n: usize },

    /// Items passed to an operation must be pairwise distinct.
    #[error("items must be pairwise distinct: {items:?}")]
    DuplicateItems { items: Vec<usize> },

    /// A presented subset must contain at least two items.
    #[error("subset must contain at least 2 items, got {len}")]
    SubsetTooSmall { len: usize },

    /// Adaptive quadrature could not reach the requested accuracy.
    #[error("quadrature failed: error estimate {achieved:e} above target {target:e}")]
    IntegrationFailure { achieved: f64, target: f64 },

    /// A direction vector must have unit Euclidean norm.
    #[error("expected a unit vector, got norm {norm}")]
    NotUnitVector { norm: f64 },

    /// Cone directions must not be parallel or anti-parallel.
    #[error("cone directions are (anti-)parallel: |<u1,u2>| = {abs_dot}")]
    ParallelDirections { abs_dot: f64 },

    /// Two random utilities compared by a conditional probability are almost surely tied.
    #[error("utilities of items {i} and {j} have zero variance difference; comparison is degenerate")]
    ZeroVariancePair { i: usize, j: usize },

    /// A pair item also appears in the conditioning context.
    #[error("pair item {item} also appears in the conditioning context")]
    ContextOverlap { item: usize },

    /// Rejection sampling exhausted its proposal budget with no accepted draw.
    #[error("no draw matched the conditioning event after {proposals} proposals")]
    NoAcceptedSamples { proposals: u64 },

    /// An exhaustive enumeration would exceed its configured cap.
    #[error("enumeration of {count} cases exceeds cap {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    /// A serialized model failed validation on load.
    #[error("invalid model data: {detail}")]
    InvalidModelData { detail: String },

    /// Underlying I/O failure while reading or writing a model file.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Underlying JSON failure while reading or writing a model file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias for results in this crate.
pub type CoreResult<T> = Result<T, CoreError>;
