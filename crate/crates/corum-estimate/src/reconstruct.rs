//! Reconstruction of a three-item utility model from comparison geometry.
//!
//! The estimated mean offsets and pairwise direction angles determine, up
//! to overall scale, the Gram structure of the whitened difference vectors.
//! Solving a small triangular system recovers a mean vector and covariance
//! on the triple whose implied choice probabilities reproduce the inputs.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Vector2};

use crate::angle::{estimate_alphas, estimate_angle, AngleSearchConfig, ConeObservations};
use crate::counts::{cone_frequency, SignedDiff, TripleCounts, TripleFrequencies, DIFF_PAIRS};
use crate::error::{EstimateError, EstimateResult};

/// Which of the two derived scale factors dominated during reconstruction,
/// determining which pair of difference vectors anchored the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleBranch {
    /// The second difference's scale was at least the third's.
    SecondDifference,
    /// The third difference's scale was strictly larger.
    ThirdDifference,
}

/// Scale-free estimate of a three-item utility model, embedded in the
/// triple's position space.
///
/// The mean sums to zero and the covariance annihilates the all-ones
/// vector; the scale is fixed by giving the first difference unit
/// variance, so the trace is free (but always at least one half).
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeItemEstimate {
    items: [usize; 3],
    mu_hat: DVector<f64>,
    sigma_hat: DMatrix<f64>,
    alphas: [f64; 3],
    betas: [f64; 3],
    residuals: [f64; 3],
    branch: ScaleBranch,
    trace: f64,
}

impl ThreeItemEstimate {
    /// The items this estimate describes, ascending.
    pub fn items(&self) -> [usize; 3] {
        self.items
    }

    /// Estimated mean over the three positions; sums to zero.
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    /// Estimated covariance over the three positions; rows sum to zero
    /// and the first difference has unit variance.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    /// Mean offsets per difference vector, in the units of the unit-scale
    /// whitening.
    pub fn alphas(&self) -> [f64; 3] {
        self.alphas
    }

    /// Whitened inner products per difference pair, indexed like
    /// [`DIFF_PAIRS`]; clamped strictly inside `(-1, 1)`.
    pub fn betas(&self) -> [f64; 3] {
        self.betas
    }

    /// Worst event-frequency discrepancies of the fitted angles, indexed
    /// like [`DIFF_PAIRS`]; zero when reconstructed from given angles.
    pub fn residuals(&self) -> [f64; 3] {
        self.residuals
    }

    /// Which scale factor anchored the reconstruction.
    pub fn branch(&self) -> ScaleBranch {
        self.branch
    }

    /// Trace of the estimated covariance; at least one half.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Rescales so the trace matches `target` (mean scales as the square
    /// root), for comparing against a trace-normalized model.
    pub fn rescaled_to_trace(&self, target: f64) -> (DVector<f64>, DMatrix<f64>) {
        let factor = target / self.trace;
        (&self.mu_hat * factor.sqrt(), &self.sigma_hat * factor)
    }
}

/// How well the rarest ranking is represented in the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityReport {
    /// Smallest observed ordering frequency.
    pub gamma_hat: f64,
    /// Frequency below which the angle estimates are flagged unreliable.
    pub warn_floor: f64,
    /// Whether `gamma_hat` fell below the floor (estimation proceeds).
    pub low: bool,
    /// Which mean-offset inversions hit the frequency clamp (saturated
    /// halfspaces).
    pub alpha_clamped: [bool; 3],
}

/// Controls for the per-triple estimator.
#[derive(Debug, Clone)]
pub struct TripleConfig {
    /// Minimum effective sample size accepted.
    pub min_samples: f64,
    /// Keeps fitted angles away from degeneracy: inner products are
    /// clamped to magnitude at most `1 - angle_floor`.
    pub angle_floor: f64,
    /// Observability warning threshold in expected counts: the report
    /// flags triples whose rarest ordering was seen fewer than this many
    /// times.
    pub gamma_warn_count: f64,
    /// Angle search controls.
    pub angle: AngleSearchConfig,
}

impl Default for TripleConfig {
    fn default() -> Self {
        Self {
            min_samples: 100.0,
            angle_floor: 1e-6,
            gamma_warn_count: 10.0,
            angle: AngleSearchConfig::default(),
        }
    }
}

/// Builds the three-item estimate from mean offsets and direction angles.
///
/// `alphas` are the offsets of the three difference vectors; `betas` their
/// pairwise whitened inner products indexed like [`DIFF_PAIRS`]. The solve
/// anchors on the first/second or first/third difference pair, whichever
/// carries the larger derived scale, and embeds the result back into the
/// triple's position space.
///
/// # Errors
/// [`EstimateError::SingularSystem`] when the two anchor angles coincide
/// (the linear system loses rank) and [`EstimateError::NegativeScale`]
/// when the angles imply a geometrically impossible configuration.
pub fn reconstruct_three(
    alphas: [f64; 3],
    betas: [f64; 3],
    angle_floor: f64,
) -> EstimateResult<ThreeItemEstimate> {
    let cap = 1.0 - angle_floor;
    let b12 = betas[0].clamp(-cap, cap);
    let b23 = betas[1].clamp(-cap, cap);
    let b13 = betas[2].clamp(-cap, cap);
    let r12 = (1.0 - b12 * b12).sqrt();
    let r13 = (1.0 - b13 * b13).sqrt();

    // Scales of the second and third whitened differences relative to the
    // first, from the closure identity (third = first + second).
    let det = b13 * r12 - b12 * r13;
    if det.abs() < 1e-12 {
        return Err(EstimateError::SingularSystem {
            beta12: b12,
            beta13: b13,
        });
    }
    let s = r13 / det;
    let t = r12 / det;
    if s <= 0.0 || t <= 0.0 {
        return Err(EstimateError::NegativeScale { s, t });
    }

    let (basis, scale, beta, radial, fact, q, branch) = if s >= t {
        (
            Matrix2x3::new(1.0, -1.0, 0.0, 0.0, 1.0, -1.0),
            s,
            b12,
            r12,
            Matrix2::new(2.0, 1.0, 1.0, 2.0) / 3.0,
            Vector2::new(alphas[0], alphas[1]),
            ScaleBranch::SecondDifference,
        )
    } else {
        (
            Matrix2x3::new(1.0, -1.0, 0.0, 1.0, 0.0, -1.0),
            t,
            b13,
            r13,
            Matrix2::new(2.0, -1.0, -1.0, 2.0) / 3.0,
            Vector2::new(alphas[0], alphas[2]),
            ScaleBranch::ThirdDifference,
        )
    };
    // Whitened anchor directions as columns of an upper-triangular factor,
    // mapped through the inverse Gram matrix of the anchor differences.
    let tri = Matrix2::new(1.0, beta, 0.0, radial);
    let lift = tri * Matrix2::new(1.0, 0.0, 0.0, scale) * fact;
    let embedded = lift * basis;
    let sigma_hat = embedded.transpose() * embedded;
    let tri_inv = Matrix2::new(1.0, -beta / radial, 0.0, 1.0 / radial);
    let mu_hat = embedded.transpose() * tri_inv.transpose() * q;

    let trace = sigma_hat.trace();
    debug_assert!(
        (trace - (1.0 + s * s + t * t) / 3.0).abs() <= 1e-8 * trace.max(1.0),
        "trace identity violated: {trace} vs {}",
        (1.0 + s * s + t * t) / 3.0
    );
    Ok(ThreeItemEstimate {
        items: [0, 1, 2],
        mu_hat: DVector::from_iterator(3, mu_hat.iter().copied()),
        sigma_hat: DMatrix::from_iterator(3, 3, sigma_hat.iter().copied()),
        alphas,
        betas: [b12, b23, b13],
        residuals: [0.0; 3],
        branch,
        trace,
    })
}

/// Estimates a three-item model from observed ranking counts with default
/// controls. See [`estimate_triple_with`].
pub fn estimate_triple(
    counts: &TripleCounts,
) -> EstimateResult<(ThreeItemEstimate, ObservabilityReport)> {
    estimate_triple_with(&counts.frequencies(), &TripleConfig::default())
}

/// Estimates a three-item model from ranking frequencies.
///
/// Pipeline: invert the halfspace frequencies into mean offsets, fit the
/// angle of each difference pair against its four sign-pair event
/// frequencies, then reconstruct the model. Sign flips make every fitted
/// offset nonnegative and are undone on the recovered inner products.
///
/// # Errors
/// [`EstimateError::NotEnoughSamples`] below `cfg.min_samples`; angle and
/// reconstruction failures propagate.
pub fn estimate_triple_with(
    freqs: &TripleFrequencies,
    cfg: &TripleConfig,
) -> EstimateResult<(ThreeItemEstimate, ObservabilityReport)> {
    let total = freqs.total();
    if total < cfg.min_samples {
        return Err(EstimateError::NotEnoughSamples {
            total,
            min: cfg.min_samples,
        });
    }
    let offsets = estimate_alphas(freqs);
    let warn_floor = cfg.gamma_warn_count / total;
    let gamma_hat = freqs.min_frequency();
    let report = ObservabilityReport {
        gamma_hat,
        warn_floor,
        low: gamma_hat < warn_floor,
        alpha_clamped: offsets.clamped,
    };
    let signs: Vec<f64> = offsets
        .alphas
        .iter()
        .map(|&a| if a >= 0.0 { 1.0 } else { -1.0 })
        .collect();

    let mut betas = [0.0; 3];
    let mut residuals = [0.0; 3];
    for (slot, &(p, q)) in DIFF_PAIRS.iter().enumerate() {
        let (first, second) = if offsets.alphas[p].abs() >= offsets.alphas[q].abs() {
            (p, q)
        } else {
            (q, p)
        };
        let mut event_freqs = [0.0; 4];
        for (event, freq) in event_freqs.iter_mut().enumerate() {
            let sigma1 = if event < 2 { 1.0 } else { -1.0 };
            let sigma2 = if event % 2 == 0 { 1.0 } else { -1.0 };
            *freq = cone_frequency(
                freqs,
                SignedDiff::new(first, sigma1 * signs[first] > 0.0),
                SignedDiff::new(second, sigma2 * signs[second] > 0.0),
            );
        }
        let fitted = estimate_angle(
            offsets.alphas[first].abs(),
            offsets.alphas[second].abs(),
            &ConeObservations { freqs: event_freqs },
            total,
            &cfg.angle,
        )?;
        betas[slot] = signs[p] * signs[q] * fitted.beta;
        residuals[slot] = fitted.residual;
    }

    let mut estimate = reconstruct_three(offsets.alphas, betas, cfg.angle_floor)?;
    estimate.items = freqs.triple();
    estimate.residuals = residuals;
    Ok((estimate, report))
}

/// Exact ranking probabilities of a normalized model on one triple,
/// packaged as frequencies with a large pseudo sample size so clamping
/// and residual caps become immaterial.
pub fn exact_frequencies(
    model: &corum_core::model::ProbitModel,
    triple: [usize; 3],
    quad: &corum_core::integrate::QuadConfig,
) -> EstimateResult<TripleFrequencies> {
    let dist = model.triple_rank_probabilities(triple[0], triple[1], triple[2], quad)?;
    TripleFrequencies::from_probabilities(triple, *dist.probs(), 1e12)
}
