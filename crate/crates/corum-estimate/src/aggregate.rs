//! Stitching per-triple estimates into one global model.
//!
//! Each triple estimate fixes its own scale, so only ratios of pairwise
//! difference variances transfer between triples. Propagating those ratios
//! along the pair graph from a reference pair yields every difference
//! variance up to one common factor, which the trace normalization pins
//! down; means then follow from scale-matched per-pair differences.

use std::collections::{BTreeMap, VecDeque};

use corum_core::error::CoreError;
use corum_core::integrate::QuadConfig;
use corum_core::linalg::{center_vector, centering_matrix, sorted_symmetric_eigen, symmetrize};
use corum_core::model::ProbitModel;
use corum_core::sampling::UtilitySampler;
use corum_core::triple::PERMUTATIONS3;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::counts::{TripleCounts, TripleFrequencies};
use crate::error::{EstimateError, EstimateResult};
use crate::graph::{build_subgraph, ItemPairGraph};
use crate::reconstruct::{
    estimate_triple_with, exact_frequencies, ThreeItemEstimate, TripleConfig,
};

/// Per-triple estimates with their effective sample sizes, keyed by the
/// sorted triple.
pub type EstimateMap = BTreeMap<[usize; 3], (ThreeItemEstimate, f64)>;

/// Restricts a mean and covariance to `triple` and projects both onto the
/// hyperplane orthogonal to the all-ones vector.
///
/// The projection leaves every pairwise difference statistic unchanged
/// (difference vectors are orthogonal to ones), which is what makes
/// three-item snapshots comparable across triples.
pub fn restrict_project(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    triple: [usize; 3],
) -> (DVector<f64>, DMatrix<f64>) {
    debug_assert!(
        triple[0] != triple[1] && triple[1] != triple[2] && triple[0] != triple[2],
        "triple items must be distinct: {triple:?}"
    );
    let sub_mu = DVector::from_fn(3, |p, _| mu[triple[p]]);
    let sub = DMatrix::from_fn(3, 3, |p, q| sigma[(triple[p], triple[q])]);
    let center = centering_matrix(3);
    (&center * sub_mu, &center * sub * &center)
}

/// Variance of the difference between two of a triple's items under the
/// triple's estimated covariance.
fn pair_form(estimate: &ThreeItemEstimate, triple: [usize; 3], pair: (usize, usize)) -> f64 {
    let pos = |item: usize| {
        triple
            .iter()
            .position(|&t| t == item)
            .expect("edge pair items must belong to the annotated triple")
    };
    let (a, b) = (pos(pair.0), pos(pair.1));
    let s = estimate.sigma();
    s[(a, a)] + s[(b, b)] - 2.0 * s[(a, b)]
}

/// Strategy for turning edge-wise variance ratios into a global covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSolver {
    /// Propagate ratios along breadth-first tree paths from the reference
    /// pair, then verify all edge constraints post hoc. Deterministic and
    /// constructive; the default.
    PathPropagation,
    /// Bisect the bracket width `t` and solve each fixed-`t` check as a
    /// system of log-domain difference constraints.
    RatioBracketBisection,
}

/// Result of covariance aggregation.
#[derive(Debug, Clone)]
pub struct SigmaAggregate {
    /// Aggregated covariance: symmetric, rows summing to zero, trace `n`.
    pub sigma_bar: DMatrix<f64>,
    /// Largest relative violation of an edge's variance-ratio constraint
    /// by the returned covariance.
    pub t_star: f64,
    /// Magnitude of the most negative eigenvalue clipped during repair,
    /// when repair was needed.
    pub psd_clip: Option<f64>,
}

/// Edge ratios `d_b / d_a` read off the annotated triple estimates.
fn edge_ratios(estimates: &EstimateMap, graph: &ItemPairGraph) -> EstimateResult<Vec<f64>> {
    graph
        .edges()
        .iter()
        .map(|edge| {
            let (estimate, _) = estimates
                .get(&edge.triple)
                .ok_or(EstimateError::MissingTriple { triple: edge.triple })?;
            let qa = pair_form(estimate, edge.triple, edge.a);
            let qb = pair_form(estimate, edge.triple, edge.b);
            if qa <= 0.0 || qb <= 0.0 {
                return Err(EstimateError::NonPositiveRatio {
                    detail: format!(
                        "difference variances {qa:e}, {qb:e} on triple {:?}",
                        edge.triple
                    ),
                });
            }
            Ok(qb / qa)
        })
        .collect()
}

/// Log difference variances by breadth-first propagation from pair {0, 1}.
fn propagate_log_d(graph: &ItemPairGraph, ratios: &[f64]) -> Vec<f64> {
    let root = graph
        .vertex_index(0, 1)
        .expect("reference pair {0,1} exists for n >= 2");
    let endpoint = |edge_id: usize| {
        let e = &graph.edges()[edge_id];
        (
            graph.vertex_index(e.a.0, e.a.1).expect("vertex"),
            graph.vertex_index(e.b.0, e.b.1).expect("vertex"),
        )
    };
    let mut x = vec![f64::NAN; graph.vertices().len()];
    x[root] = 0.0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(w, edge_id) in graph.neighbors(v) {
            if x[w].is_nan() {
                let (va, _) = endpoint(edge_id);
                let step = ratios[edge_id].ln();
                x[w] = if va == v { x[v] + step } else { x[v] - step };
                queue.push_back(w);
            }
        }
    }
    debug_assert!(x.iter().all(|v| v.is_finite()), "pair graph connected");
    x
}

/// Feasibility check of the log-domain difference constraints at bracket
/// width `t`; on success returns satisfying log variances.
///
/// Each edge with ratio `r` demands `x_b - x_a <= ln((1+t) r)` and, when
/// `(1-t) r > 0`, `x_a - x_b <= -ln((1-t) r)`. Infeasibility is a negative
/// cycle of the constraint arcs.
fn feasible_log_d(graph: &ItemPairGraph, ratios: &[f64], t: f64) -> Option<Vec<f64>> {
    let count = graph.vertices().len();
    let mut arcs = Vec::with_capacity(2 * ratios.len());
    for (edge, &ratio) in graph.edges().iter().zip(ratios) {
        let va = graph.vertex_index(edge.a.0, edge.a.1).expect("vertex");
        let vb = graph.vertex_index(edge.b.0, edge.b.1).expect("vertex");
        arcs.push((va, vb, ((1.0 + t) * ratio).ln()));
        if (1.0 - t) * ratio > 0.0 {
            arcs.push((vb, va, -((1.0 - t) * ratio).ln()));
        }
    }
    // Bellman-Ford with an implicit zero-distance source at every vertex.
    let mut dist = vec![0.0f64; count];
    for round in 0..count {
        let mut changed = false;
        for &(u, v, w) in &arcs {
            if dist[u] + w < dist[v] - 1e-15 {
                dist[v] = dist[u] + w;
                changed = true;
            }
        }
        if !changed {
            return Some(dist);
        }
        if round + 1 == count {
            return None;
        }
    }
    Some(dist)
}

/// Builds the trace-`n` covariance implied by per-pair log difference
/// variances, plus the post-hoc worst relative ratio violation.
fn sigma_from_log_d(
    graph: &ItemPairGraph,
    ratios: &[f64],
    log_d: &[f64],
) -> (DMatrix<f64>, f64) {
    let n = graph.n();
    let shift = -log_d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut d: Vec<f64> = log_d.iter().map(|x| (x + shift).exp()).collect();
    let total: f64 = d.iter().sum();
    let scale = (n * n) as f64 / total;
    for v in &mut d {
        *v *= scale;
    }

    let mut t_star = 0.0f64;
    for (edge, &ratio) in graph.edges().iter().zip(ratios) {
        let va = graph.vertex_index(edge.a.0, edge.a.1).expect("vertex");
        let vb = graph.vertex_index(edge.b.0, edge.b.1).expect("vertex");
        t_star = t_star.max((d[vb] / d[va] / ratio - 1.0).abs());
    }

    let mut s_row = vec![0.0f64; n];
    for (v, &(i, j)) in graph.vertices().iter().enumerate() {
        s_row[i] += d[v];
        s_row[j] += d[v];
    }
    let diag: Vec<f64> = s_row.iter().map(|s| (s - n as f64) / n as f64).collect();
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        sigma[(i, i)] = diag[i];
    }
    for (v, &(i, j)) in graph.vertices().iter().enumerate() {
        let off = 0.5 * (diag[i] + diag[j] - d[v]);
        sigma[(i, j)] = off;
        sigma[(j, i)] = off;
    }
    (sigma, t_star)
}

/// Clips negative eigenvalues, re-centers, and rescales to trace `n`.
///
/// Returns the repaired matrix and the clipped magnitude when the input
/// was materially indefinite.
fn repair_psd(sigma: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, Option<f64>) {
    let (evals, evecs) = sorted_symmetric_eigen(sigma);
    let floor = -1e-12 * n as f64;
    let clip = if evals[0] < floor {
        Some(-evals[0])
    } else {
        None
    };
    let mut repaired = if clip.is_some() {
        let clipped = DVector::from_fn(n, |k, _| evals[k].max(0.0));
        &evecs * DMatrix::from_diagonal(&clipped) * evecs.transpose()
    } else {
        sigma.clone()
    };
    let center = centering_matrix(n);
    repaired = &center * repaired * &center;
    let trace = repaired.trace();
    repaired *= n as f64 / trace;
    (symmetrize(&repaired), clip)
}

/// Aggregates per-triple covariances into one trace-`n` covariance.
///
/// Edge ratios of difference variances are scale-free, so they transfer
/// across triples; the solver turns them into per-pair difference
/// variances up to one factor, the trace condition fixes the factor, and
/// the covariance entries follow by inverting the difference map. A final
/// eigenvalue clip guards against finite-sample indefiniteness.
///
/// # Errors
/// [`EstimateError::MissingTriple`] when an edge's annotated triple has no
/// estimate; [`EstimateError::NonPositiveRatio`] for degenerate difference
/// variances; [`EstimateError::InfeasibleAtCap`] when no bracket width
/// `t <= 1` reconciles the ratios.
pub fn aggregate_sigma(
    estimates: &EstimateMap,
    graph: &ItemPairGraph,
    solver: SigmaSolver,
) -> EstimateResult<SigmaAggregate> {
    let ratios = edge_ratios(estimates, graph)?;
    let log_d = match solver {
        SigmaSolver::PathPropagation => propagate_log_d(graph, &ratios),
        SigmaSolver::RatioBracketBisection => {
            let Some(mut best) = feasible_log_d(graph, &ratios, 1.0) else {
                return Err(EstimateError::InfeasibleAtCap);
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                match feasible_log_d(graph, &ratios, mid) {
                    Some(x) => {
                        best = x;
                        hi = mid;
                    }
                    None => lo = mid,
                }
            }
            best
        }
    };
    let (raw, t_star) = sigma_from_log_d(graph, &ratios, &log_d);
    if t_star > 1.0 {
        return Err(EstimateError::InfeasibleAtCap);
    }
    let (sigma_bar, psd_clip) = repair_psd(&raw, graph.n());
    Ok(SigmaAggregate {
        sigma_bar,
        t_star,
        psd_clip,
    })
}

/// Result of mean aggregation.
#[derive(Debug, Clone)]
pub struct MuAggregate {
    /// Aggregated mean, summing to zero.
    pub mu_bar: DVector<f64>,
    /// Achieved objective: the largest entrywise deviation between any
    /// scale-matched triple mean and the aggregated mean's projection onto
    /// that triple.
    pub objective: f64,
    /// Scale factor applied to each triple's estimate to match the
    /// aggregated covariance.
    pub scales: BTreeMap<[usize; 3], f64>,
}

/// Aggregates per-triple means against an aggregated covariance.
///
/// Each triple's estimate is rescaled so its covariance trace matches the
/// projection of `sigma_bar` onto the triple; every item pair then gets a
/// mean difference by weighted average (weights proportional to sample
/// sizes) over the triples containing it, and differences propagate from
/// item 0 before centering.
///
/// # Errors
/// [`EstimateError::MissingTriple`] when a graph edge's triple is absent;
/// [`EstimateError::NonPositiveRatio`] for a nonpositive trace ratio.
pub fn aggregate_mu(
    estimates: &EstimateMap,
    sigma_bar: &DMatrix<f64>,
    graph: &ItemPairGraph,
) -> EstimateResult<MuAggregate> {
    let n = graph.n();
    for edge in graph.edges() {
        if !estimates.contains_key(&edge.triple) {
            return Err(EstimateError::MissingTriple { triple: edge.triple });
        }
    }
    let zero = DVector::zeros(n);
    let mut scales = BTreeMap::new();
    let mut diffs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (&triple, (estimate, weight)) in estimates {
        let (_, projected) = restrict_project(&zero, sigma_bar, triple);
        let ratio = projected.trace() / estimate.trace();
        if ratio <= 0.0 {
            return Err(EstimateError::NonPositiveRatio {
                detail: format!("trace ratio {ratio:e} on triple {triple:?}"),
            });
        }
        let scale = ratio.sqrt();
        scales.insert(triple, scale);
        let scaled = estimate.mu() * scale;
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let entry = diffs.entry((triple[a], triple[b])).or_insert((0.0, 0.0));
            entry.0 += weight * (scaled[a] - scaled[b]);
            entry.1 += weight;
        }
    }

    // Propagate mean levels from item 0 across covered pairs, then center.
    let mut adjacency = vec![Vec::new(); n];
    for (&(i, j), &(sum, weight)) in &diffs {
        let diff = sum / weight;
        adjacency[i].push((j, diff));
        adjacency[j].push((i, -diff));
    }
    let mut level = vec![f64::NAN; n];
    level[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for &(j, diff) in &adjacency[i] {
            if level[j].is_nan() {
                // diff estimates mu_i - mu_j.
                level[j] = level[i] - diff;
                queue.push_back(j);
            }
        }
    }
    debug_assert!(level.iter().all(|v| v.is_finite()), "pair cover connected");
    let mu_bar = center_vector(&DVector::from_vec(level));

    let mut objective = 0.0f64;
    for (&triple, (estimate, _)) in estimates {
        let (target, _) = restrict_project(&mu_bar, sigma_bar, triple);
        let scaled = estimate.mu() * scales[&triple];
        objective = objective.max((scaled - target).amax());
    }
    Ok(MuAggregate {
        mu_bar,
        objective,
        scales,
    })
}

/// A full aggregated model with its program diagnostics.
#[derive(Debug, Clone)]
pub struct GlobalEstimate {
    model: ProbitModel,
    t_star: f64,
    per_triple_scales: BTreeMap<[usize; 3], f64>,
}

impl GlobalEstimate {
    fn from_parts(
        mu_bar: DVector<f64>,
        sigma_bar: DMatrix<f64>,
        t_star: f64,
        per_triple_scales: BTreeMap<[usize; 3], f64>,
    ) -> EstimateResult<Self> {
        // Aggregation produces centered, zero-row-sum, trace-n output by
        // construction, so canonicalizing here must be a numerical no-op;
        // a material adjustment means the invariants were actually broken.
        let (model, report) = ProbitModel::new(mu_bar, sigma_bar)?.normalize()?;
        if (report.t - 1.0).abs() > 1e-9 || report.mean_offset.abs() > 1e-9 {
            return Err(EstimateError::Core(CoreError::NotNormalized {
                detail: format!(
                    "aggregated estimate failed normalization invariants: \
                     variance factor {:e} away from one, mean offset {:e}",
                    report.t - 1.0,
                    report.mean_offset
                ),
            }));
        }
        Ok(Self {
            model,
            t_star,
            per_triple_scales,
        })
    }

    /// Aggregated mean; sums to zero.
    pub fn mu_bar(&self) -> &DVector<f64> {
        self.model.mu()
    }

    /// Aggregated covariance; rows sum to zero, trace equals the item
    /// count, positive semidefinite.
    pub fn sigma_bar(&self) -> &DMatrix<f64> {
        self.model.sigma()
    }

    /// Worst relative ratio violation accepted by the covariance solver.
    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    /// Scale factor per aggregated triple.
    pub fn per_triple_scales(&self) -> &BTreeMap<[usize; 3], f64> {
        &self.per_triple_scales
    }

    /// The aggregated estimate as a normalized model.
    pub fn to_model(&self) -> ProbitModel {
        self.model.clone()
    }
}

/// Answers best-of-three queries for requested triples.
///
/// Implementations must be deterministic in `(triple, budget)` so that
/// concurrent per-triple estimation stays reproducible.
pub trait SampleSource: Sync {
    /// Ranking frequencies over `triple` worth `budget` samples.
    fn triple_frequencies(
        &self,
        triple: [usize; 3],
        budget: u64,
    ) -> EstimateResult<TripleFrequencies>;
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws ranking data from a normalized model.
pub struct ModelSamplingSource<'a> {
    model: &'a ProbitModel,
    seed: u64,
}

impl<'a> ModelSamplingSource<'a> {
    /// Wraps `model` with a base seed; each `(triple, budget)` pair gets
    /// its own derived stream, so retries draw fresh data.
    pub fn new(model: &'a ProbitModel, seed: u64) -> Self {
        Self { model, seed }
    }
}

impl SampleSource for ModelSamplingSource<'_> {
    fn triple_frequencies(
        &self,
        triple: [usize; 3],
        budget: u64,
    ) -> EstimateResult<TripleFrequencies> {
        let mut stream = splitmix64(self.seed);
        for item in triple {
            stream = splitmix64(stream ^ item as u64);
        }
        stream = splitmix64(stream ^ budget);
        let mut sampler = UtilitySampler::new(self.model, stream)?;
        let mut counts = [0u64; 6];
        for _ in 0..budget {
            let x = sampler.draw();
            let u = [x[triple[0]], x[triple[1]], x[triple[2]]];
            let mut order = [0usize, 1, 2];
            order.sort_by(|&p, &q| u[q].total_cmp(&u[p]).then(p.cmp(&q)));
            let slot = PERMUTATIONS3
                .iter()
                .position(|perm| *perm == order)
                .expect("sorted positions form a permutation");
            counts[slot] += 1;
        }
        Ok(TripleCounts::new(triple, counts)?.frequencies())
    }
}

/// Serves integration-exact ranking probabilities instead of samples; the
/// budget argument is ignored.
pub struct ExactProbabilitySource<'a> {
    model: &'a ProbitModel,
    quad: QuadConfig,
}

impl<'a> ExactProbabilitySource<'a> {
    pub fn new(model: &'a ProbitModel, quad: QuadConfig) -> Self {
        Self { model, quad }
    }
}

impl SampleSource for ExactProbabilitySource<'_> {
    fn triple_frequencies(
        &self,
        triple: [usize; 3],
        _budget: u64,
    ) -> EstimateResult<TripleFrequencies> {
        exact_frequencies(self.model, triple, &self.quad)
    }
}

/// Controls for end-to-end estimation.
#[derive(Debug, Clone, Default)]
pub struct EstimateConfig {
    /// Per-triple estimation controls.
    pub triple: TripleConfig,
    /// Covariance aggregation strategy.
    pub solver: SigmaSolver,
}

impl Default for SigmaSolver {
    fn default() -> Self {
        SigmaSolver::PathPropagation
    }
}

/// Per-triple diagnostics of an estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct TripleDiagnostics {
    /// The triple, ascending.
    pub triple: [usize; 3],
    /// Effective sample size used.
    pub samples: f64,
    /// Smallest observed ordering frequency.
    pub gamma_hat: f64,
    /// Whether the rarest ordering fell below the warning floor.
    pub low_observability: bool,
    /// Which mean offsets hit the inversion clamp.
    pub alpha_clamped: [bool; 3],
    /// Worst event-frequency discrepancies of the fitted angles.
    pub residuals: [f64; 3],
    /// Covariance scale applied during aggregation.
    pub scale: f64,
    /// Whether this triple needed the doubled-budget retry.
    pub retried: bool,
}

/// Run-level diagnostics of an estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateDiagnostics {
    /// Worst relative ratio violation accepted by the covariance solver.
    pub t_star: f64,
    /// Achieved mean-aggregation objective.
    pub mu_objective: f64,
    /// Magnitude of the eigenvalue clip when the covariance needed repair.
    pub psd_clip: Option<f64>,
    /// Total samples drawn, including retries.
    pub total_samples: u64,
    /// Per-triple details, sorted by triple.
    pub per_triple: Vec<TripleDiagnostics>,
}

/// Estimates a full n-item model by querying `source` on a sparse cover
/// of triples.
///
/// Builds the pair graph, estimates each covering triple from
/// `per_triple` samples (in parallel, deterministically seeded), retries
/// failures once with a doubled budget while the total stays within
/// `per_triple · n²`, then aggregates covariance and mean.
///
/// # Errors
/// [`EstimateError::TripleFailed`] when a triple fails after its retry or
/// the retry would bust the sample budget; aggregation errors propagate.
pub fn estimate_model<S: SampleSource>(
    source: &S,
    n: usize,
    per_triple: u64,
    cfg: &EstimateConfig,
) -> EstimateResult<(GlobalEstimate, EstimateDiagnostics)> {
    let graph = build_subgraph(n)?;
    let triples = graph.select_triples();
    let budget_cap = per_triple.saturating_mul((n * n) as u64);

    let estimate_one = |triple: [usize; 3], budget: u64| {
        let freqs = source.triple_frequencies(triple, budget)?;
        estimate_triple_with(&freqs, &cfg.triple).map(|(est, report)| (est, report, freqs))
    };

    let mut outcomes: Vec<_> = triples
        .par_iter()
        .map(|&triple| (triple, estimate_one(triple, per_triple), false))
        .collect();
    let mut total_samples = per_triple.saturating_mul(triples.len() as u64);

    // Retry failures once with a doubled budget, in sorted order so the
    // budget accounting is deterministic.
    let mut retry_ids = Vec::new();
    for idx in 0..outcomes.len() {
        if outcomes[idx].1.is_ok() {
            continue;
        }
        if total_samples.saturating_add(2 * per_triple) > budget_cap {
            // Fatal: surface the original failure. Order no longer matters.
            let (triple, outcome, _) = outcomes.swap_remove(idx);
            return Err(EstimateError::TripleFailed {
                triple,
                source: Box::new(outcome.expect_err("checked above")),
            });
        }
        total_samples += 2 * per_triple;
        retry_ids.push(idx);
    }
    let retried: Vec<_> = retry_ids
        .par_iter()
        .map(|&idx| (idx, estimate_one(outcomes[idx].0, 2 * per_triple)))
        .collect();
    for (idx, outcome) in retried {
        let triple = outcomes[idx].0;
        match outcome {
            Ok(result) => outcomes[idx] = (triple, Ok(result), true),
            Err(err) => {
                return Err(EstimateError::TripleFailed {
                    triple,
                    source: Box::new(err),
                });
            }
        }
    }

    let mut estimates: EstimateMap = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (triple, outcome, was_retried) in outcomes {
        let (estimate, report, freqs) = outcome.expect("failures were retried or returned");
        estimates.insert(triple, (estimate, freqs.total()));
        reports.insert(triple, (report, was_retried, freqs.total()));
    }

    let sigma = aggregate_sigma(&estimates, &graph, cfg.solver)?;
    let mu = aggregate_mu(&estimates, &sigma.sigma_bar, &graph)?;

    let per_triple_diag: Vec<TripleDiagnostics> = estimates
        .iter()
        .map(|(&triple, (estimate, _))| {
            let (report, was_retried, samples) = reports[&triple];
            TripleDiagnostics {
                triple,
                samples,
                gamma_hat: report.gamma_hat,
                low_observability: report.low,
                alpha_clamped: report.alpha_clamped,
                residuals: estimate.residuals(),
                scale: mu.scales[&triple],
                retried: was_retried,
            }
        })
        .collect();
    let diagnostics = EstimateDiagnostics {
        t_star: sigma.t_star,
        mu_objective: mu.objective,
        psd_clip: sigma.psd_clip,
        total_samples,
        per_triple: per_triple_diag,
    };
    let global = GlobalEstimate::from_parts(mu.mu_bar, sigma.sigma_bar, sigma.t_star, mu.scales)?;
    Ok((global, diagnostics))
}
