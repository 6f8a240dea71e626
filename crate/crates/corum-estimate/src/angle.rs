//! Mean offsets and direction angles from event frequencies.
//!
//! In the whitened plane, each pairwise comparison is a halfspace whose
//! probability is `Phi` of a mean offset `alpha`, and each pair of
//! comparisons is a cone whose probability additionally depends on the angle
//! between the two comparison directions. The offsets invert directly; the
//! angle is found by matching the model-implied cone probability to the
//! observed frequency.

use corum_core::integrate::{cone_probability, QuadConfig};
use corum_core::normal;
use nalgebra::{Matrix2, Vector2};

use crate::counts::{halfspace_frequency, SignedDiff, TripleFrequencies};
use crate::error::{EstimateError, EstimateResult};

/// Mean-offset estimates for the three comparison directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimates {
    /// `Phi^{-1}` of the (clamped) halfspace frequencies, one per
    /// difference vector.
    pub alphas: [f64; 3],
    /// Which frequencies hit the clamping floor or ceiling.
    pub clamped: [bool; 3],
}

/// Frequency floor used before inverting `Phi`: half of one observation's
/// worth of mass, so boundary frequencies stay finite without biasing
/// beyond the sampling resolution.
pub fn frequency_floor(total: f64) -> f64 {
    1.0 / (2.0 * total)
}

/// Inverts the three positive-halfspace frequencies into mean offsets.
///
/// Frequencies are clamped to `[floor, 1 - floor]` with
/// `floor = 1/(2 total)`, which bounds each estimate by
/// `sqrt(2 log(1/floor))`.
pub fn estimate_alphas(freqs: &TripleFrequencies) -> AlphaEstimates {
    let floor = frequency_floor(freqs.total());
    let mut alphas = [0.0; 3];
    let mut clamped = [false; 3];
    for diff in 0..3 {
        let raw = halfspace_frequency(freqs, SignedDiff::new(diff, true));
        let clipped = raw.clamp(floor, 1.0 - floor);
        clamped[diff] = clipped != raw;
        alphas[diff] = normal::quantile(clipped);
    }
    AlphaEstimates { alphas, clamped }
}

/// Observed frequencies of the four sign-pair cone events for two
/// directions, indexed `[(+,+), (+,-), (-,+), (-,-)]` where `+`/`-` refer
/// to the two (sign-flipped) comparison directions in order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeObservations {
    pub freqs: [f64; 4],
}

/// Search controls for the angle estimator.
#[derive(Debug, Clone)]
pub struct AngleSearchConfig {
    /// Exclusive search bounds: the wedge angle ranges over
    /// `(theta_min, pi - theta_min)`.
    pub theta_min: f64,
    /// Bisection interval width at which refinement stops.
    pub theta_tol: f64,
    /// Quadrature accuracy for the model-implied cone probabilities.
    pub quad: QuadConfig,
}

impl Default for AngleSearchConfig {
    fn default() -> Self {
        Self {
            theta_min: 1e-3,
            theta_tol: 1e-8,
            quad: QuadConfig::with_tolerance(1e-9),
        }
    }
}

/// An estimated angle between two whitened comparison directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    /// Estimated inner product of the two directions: `-cos(theta)`.
    pub beta: f64,
    /// The fitted wedge angle (width of the both-negative cone).
    pub theta: f64,
    /// Worst absolute discrepancy between fitted and observed event
    /// frequencies at `theta`.
    pub residual: f64,
}

/// Residual threshold above which a fit is rejected: ten times the
/// statistical noise scale of six estimated frequencies.
pub fn residual_cap(total: f64) -> f64 {
    10.0 * ((6.0 * total).ln() / total).sqrt()
}

/// Model-implied probabilities of the four sign-pair events for unit-offset
/// directions `v1, v2` with `<v1, m> = d1`, `<v2, m> = d2`, and wedge angle
/// `theta = pi - angle(v1, v2)`.
///
/// Only the `(+,+)` event needs quadrature: the halfspace marginals pin the
/// rest, since `P(+,+) + P(+,-) = Phi(d1)` and `P(+,+) + P(-,+) = Phi(d2)`.
pub fn cone_event_probabilities(
    d1: f64,
    d2: f64,
    theta: f64,
    quad: &QuadConfig,
) -> EstimateResult<[f64; 4]> {
    let v1 = Vector2::new(1.0, 0.0);
    let v2 = Vector2::new(-theta.cos(), theta.sin());
    let mean = Vector2::new(d1, (d2 + d1 * theta.cos()) / theta.sin());
    let both = cone_probability(mean, Matrix2::identity(), v1, v2, quad)?;
    let p1 = normal::cdf(d1);
    let p2 = normal::cdf(d2);
    Ok([both, p1 - both, p2 - both, 1.0 - p1 - p2 + both])
}

/// Estimates the angle between two whitened comparison directions from the
/// observed sign-pair frequencies, given their nonnegative mean offsets
/// `d1 >= d2 >= 0`.
///
/// With the marginals fixed by `d1, d2`, each of the four model-implied
/// event probabilities is an affine function of the both-positive mass
/// `P(theta)`, so the worst event discrepancy is minimized at the Chebyshev
/// center of the four affinely-shifted observations, clamped to the range
/// `P` attains. `P` is strictly increasing in the angle — widening the
/// wedge at fixed marginals only adds mass — so the angle matching the
/// target mass is found by bisection.
///
/// # Errors
/// [`EstimateError::NoFeasibleAngle`] when the residual at the best angle
/// exceeds [`residual_cap`] for the effective sample size `total`;
/// quadrature errors propagate.
pub fn estimate_angle(
    d1: f64,
    d2: f64,
    obs: &ConeObservations,
    total: f64,
    cfg: &AngleSearchConfig,
) -> EstimateResult<AngleEstimate> {
    assert!(
        d1 >= d2 && d2 >= 0.0,
        "offsets must be ordered nonnegative: d1 = {d1}, d2 = {d2}"
    );
    let both_positive =
        |theta: f64| -> EstimateResult<f64> { Ok(cone_event_probabilities(d1, d2, theta, &cfg.quad)?[0]) };

    // Each event probability expressed through the both-positive mass p:
    // p - c is the signed discrepancy of that event, so the worst absolute
    // discrepancy is max_i |p - c_i|, minimized at the midrange of c.
    let p1 = normal::cdf(d1);
    let p2 = normal::cdf(d2);
    let c = [
        obs.freqs[0],
        p1 - obs.freqs[1],
        p2 - obs.freqs[2],
        obs.freqs[3] - 1.0 + p1 + p2,
    ];
    let c_min = c.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let c_max = c.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let center = 0.5 * (c_min + c_max);

    let mut lo = cfg.theta_min;
    let mut hi = std::f64::consts::PI - cfg.theta_min;
    let p_lo = both_positive(lo)?;
    let p_hi = both_positive(hi)?;
    let target = center.clamp(p_lo.min(p_hi), p_lo.max(p_hi));
    while hi - lo > cfg.theta_tol {
        let mid = 0.5 * (lo + hi);
        if both_positive(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let fitted = both_positive(theta)?;
    let residual = c
        .iter()
        .map(|&ci| (fitted - ci).abs())
        .fold(0.0, f64::max);

    let cap = residual_cap(total);
    if residual > cap {
        return Err(EstimateError::NoFeasibleAngle { residual, cap });
    }
    Ok(AngleEstimate {
        beta: -theta.cos(),
        theta,
        residual,
    })
}
