//! Moment-matching estimation of correlated probit utility models from
//! best-of-three ranking data.
//!
//! Each three-item menu yields six ordering frequencies. Halfspace
//! frequencies invert to mean offsets along the pairwise difference
//! directions; sign-pair event frequencies pin the angles between those
//! directions; a small triangular solve turns offsets and angles into a
//! scale-free three-item model. A sparse cover of triples then stitches the
//! per-triple estimates into a full mean and covariance by propagating
//! variance ratios along a low-diameter pair graph.

pub mod aggregate;
pub mod angle;
pub mod counts;
pub mod error;
pub mod graph;
pub mod reconstruct;

pub use aggregate::{
    aggregate_mu, aggregate_sigma, estimate_model, restrict_project, EstimateConfig,
    EstimateDiagnostics, EstimateMap, ExactProbabilitySource, GlobalEstimate,
    ModelSamplingSource, MuAggregate, SampleSource, SigmaAggregate, SigmaSolver,
    TripleDiagnostics,
};
pub use angle::{
    cone_event_probabilities, estimate_alphas, estimate_angle, AlphaEstimates, AngleEstimate,
    AngleSearchConfig, ConeObservations,
};
pub use counts::{
    cone_frequency, counts_from_rankings, halfspace_frequency, load_counts_csv, read_counts_csv,
    save_counts_csv, write_counts_csv, SignedDiff, TripleCounts, TripleFrequencies, DIFF_PAIRS,
};
pub use error::{EstimateError, EstimateResult};
pub use graph::{build_subgraph, ItemPairGraph, PairEdge};
pub use reconstruct::{
    estimate_triple, estimate_triple_with, exact_frequencies, reconstruct_three,
    ObservabilityReport, ScaleBranch, ThreeItemEstimate, TripleConfig,
};
