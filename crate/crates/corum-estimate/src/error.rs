//! Error type for estimation and aggregation.

use corum_core::error::CoreError;
use thiserror::Error;

/// Errors raised while estimating models from ranking counts.
#[derive(Debug, Error)]
pub enum EstimateError {
    /// A ranking refers to a different item triple than the counts target.
    #[error("ranking over items {found:?} does not match the triple {expected:?}")]
    MixedTriples {
        expected: [usize; 3],
        found: Vec<usize>,
    },
    /// No rankings were supplied.
    #[error("cannot build counts from an empty ranking list")]
    EmptyRankings,
    /// Triple-based estimation needs at least three items.
    #[error("pair graph needs at least 3 items, got {n}")]
    TooFewItems { n: usize },
    /// The observation count is below the configured minimum.
    #[error("triple has {total} samples, below the minimum of {min}")]
    NotEnoughSamples { total: f64, min: f64 },
    /// No direction angle reproduces the observed cone frequencies within
    /// the statistical tolerance; the frequencies are structurally
    /// inconsistent with the model family or too noisy.
    #[error(
        "no feasible angle: best residual {residual:.3e} exceeds cap {cap:.3e} \
         (misspecification or sample starvation)"
    )]
    NoFeasibleAngle { residual: f64, cap: f64 },
    /// The two inner products driving the scale reconstruction coincide, so
    /// the linear system for the relative scales is singular.
    #[error("singular reconstruction system: beta12 = {beta12}, beta13 = {beta13}")]
    SingularSystem { beta12: f64, beta13: f64 },
    /// The solved relative scales are not both positive, which contradicts
    /// any valid model and signals inconsistent inputs.
    #[error("reconstructed scales must be positive, got s = {s}, t = {t}")]
    NegativeScale { s: f64, t: f64 },
    /// A quadratic form or trace that must be positive came out nonpositive.
    #[error("nonpositive ratio: {detail}")]
    NonPositiveRatio { detail: String },
    /// The ratio-bracket program admits no tolerance parameter t <= 1.
    #[error("ratio constraints infeasible even at the cap t = 1")]
    InfeasibleAtCap,
    /// A triple required by the aggregation graph has no estimate.
    #[error("no estimate supplied for triple {triple:?}")]
    MissingTriple { triple: [usize; 3] },
    /// A per-triple estimation failed even after the retry with a doubled
    /// budget, or the retry would exceed the total sample budget.
    #[error("estimation failed for triple {triple:?}: {source}")]
    TripleFailed {
        triple: [usize; 3],
        #[source]
        source: Box<EstimateError>,
    },
    /// A malformed counts CSV row.
    #[error("counts CSV line {line}: {detail}")]
    ParseRow { line: u64, detail: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result alias for estimation operations.
pub type EstimateResult<T> = Result<T, EstimateError>;
