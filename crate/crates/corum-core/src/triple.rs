//! Six-way ranking probabilities for item triples.
//!
//! For a triple of items, every ranking event depends on the utilities only
//! through their pairwise differences, which live in the plane orthogonal to
//! `(1, 1, 1)`. Projecting the restricted Gaussian onto that plane with an
//! orthonormal basis turns each of the six possible orderings into an angular
//! sector of a bivariate Gaussian, whose masses the polar quadrature engine
//! integrates.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::f64::consts::PI;

use crate::error::{CoreError, CoreResult};
use crate::integrate::{PlanarGaussian, QuadConfig};
use crate::model::{ProbitModel, RANK_TOL};
use crate::normal;

/// The six permutations of three positions, lexicographically ordered.
pub const PERMUTATIONS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Permutation labels for the counts file format, aligned with
/// [`PERMUTATIONS3`]: position `a`/`b`/`c` is the first/second/third listed
/// item, best first ("acb" = first item best, then third, then second).
pub const PERM_LABELS: [&str; 6] = ["abc", "acb", "bac", "bca", "cab", "cba"];

/// Distribution over the six orderings of one item triple.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution3 {
    triple: [usize; 3],
    probs: [f64; 6],
}

impl RankDistribution3 {
    /// Builds a distribution from raw parts; probabilities follow
    /// [`PERMUTATIONS3`] order relative to `triple`.
    pub fn new(triple: [usize; 3], probs: [f64; 6]) -> Self {
        Self { triple, probs }
    }

    /// The items this distribution ranges over, in presentation order.
    pub fn triple(&self) -> [usize; 3] {
        self.triple
    }

    /// Ordering probabilities in [`PERMUTATIONS3`] order.
    pub fn probs(&self) -> &[f64; 6] {
        &self.probs
    }

    /// Probability that the items occur in exactly `order` (best first).
    ///
    /// Returns `None` when `order` is not a permutation of the triple.
    pub fn prob_of_order(&self, order: [usize; 3]) -> Option<f64> {
        PERMUTATIONS3.iter().position(|perm| {
            (0..3).all(|pos| self.triple[perm[pos]] == order[pos])
        }).map(|idx| self.probs[idx])
    }

    /// Total variation distance to another distribution over the same triple.
    ///
    /// # Panics
    /// When the two distributions range over different triples.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        assert_eq!(
            self.triple, other.triple,
            "total variation requires matching triples"
        );
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Orthonormal basis of the plane orthogonal to `(1,1,1)`, as two rows.
/// Row 0 is `(1, 1, -2)/sqrt(6)`, row 1 is `(1, -1, 0)/sqrt(2)`.
fn projection_rows() -> [Vector2<f64>; 3] {
    let s6 = 6.0f64.sqrt();
    let s2 = 2.0f64.sqrt();
    // Column `a` of the 2x3 projection, i.e. the image of e_a.
    [
        Vector2::new(1.0 / s6, 1.0 / s2),
        Vector2::new(1.0 / s6, -1.0 / s2),
        Vector2::new(-2.0 / s6, 0.0),
    ]
}

/// Projects a restricted 3-item Gaussian onto the difference plane.
///
/// # Returns
/// `(projected mean, projected covariance, images of e_a - e_b for the pairs
/// (0,1), (0,2), (1,2))`.
fn project_triple(
    mu3: &DVector<f64>,
    sigma3: &DMatrix<f64>,
) -> (Vector2<f64>, Matrix2<f64>, [Vector2<f64>; 3]) {
    let cols = projection_rows();
    let mu = mu3[0] * cols[0] + mu3[1] * cols[1] + mu3[2] * cols[2];
    let mut sigma = Matrix2::zeros();
    for a in 0..3 {
        for b in 0..3 {
            sigma += sigma3[(a, b)] * cols[a] * cols[b].transpose();
        }
    }
    let pair_images = [
        cols[0] - cols[1],
        cols[0] - cols[2],
        cols[1] - cols[2],
    ];
    (mu, sigma, pair_images)
}

/// Six ordering probabilities of a centered 3-item restriction.
pub(crate) fn triple_distribution_from_restriction(
    mu3: &DVector<f64>,
    sigma3: &DMatrix<f64>,
    cfg: &QuadConfig,
) -> CoreResult<[f64; 6]> {
    let (mu, sigma, pairs) = project_triple(mu3, sigma3);
    let gaussian = PlanarGaussian::new(mu, sigma)?;

    // Each pairwise comparison flips sign on the two angles orthogonal to its
    // image direction; collecting all six boundaries cuts the circle into six
    // arcs of constant ordering.
    let mut boundaries = [0.0f64; 6];
    for (p, w) in pairs.iter().enumerate() {
        let angle = w.y.atan2(w.x);
        boundaries[2 * p] = wrap_angle(angle + 0.5 * PI);
        boundaries[2 * p + 1] = wrap_angle(angle - 0.5 * PI);
    }
    boundaries.sort_by(f64::total_cmp);

    let mut probs = [0.0f64; 6];
    let mut seen = [false; 6];
    for m in 0..6 {
        let lo = boundaries[m];
        let hi = if m == 5 {
            boundaries[0] + 2.0 * PI
        } else {
            boundaries[m + 1]
        };
        let mid = 0.5 * (lo + hi);
        let omega = Vector2::new(mid.cos(), mid.sin());
        // Signs of the three pairwise differences on this arc.
        let beats_01 = pairs[0].dot(&omega) > 0.0;
        let beats_02 = pairs[1].dot(&omega) > 0.0;
        let beats_12 = pairs[2].dot(&omega) > 0.0;
        let wins = [
            usize::from(beats_01) + usize::from(beats_02),
            usize::from(!beats_01) + usize::from(beats_12),
            usize::from(!beats_02) + usize::from(!beats_12),
        ];
        let mut order = [0usize, 1, 2];
        order.sort_by_key(|&pos| std::cmp::Reverse(wins[pos]));
        let idx = PERMUTATIONS3
            .iter()
            .position(|perm| *perm == order)
            .expect("every position ordering is one of the six permutations");
        debug_assert!(!seen[idx], "arc orderings must be pairwise distinct");
        seen[idx] = true;
        probs[idx] = gaussian.sector_probability(lo, hi, cfg)?;
    }
    // Six sector integrals, each within the configured tolerance plus a
    // round-off floor that grows on near-degenerate geometry; generous
    // headroom so only logic errors (not accuracy noise) trip this.
    debug_assert!(
        (probs.iter().sum::<f64>() - 1.0).abs() < (600.0 * cfg.target_abs_tol).max(1e-6),
        "ordering probabilities should sum to 1, got {:e} off",
        probs.iter().sum::<f64>() - 1.0
    );
    Ok(probs)
}

/// Wraps an angle into `[0, 2*pi)`.
fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a
}

impl ProbitModel {
    /// `P{X_i >= X_j}`: the closed-form marginal comparison probability
    /// `Phi((mu_i - mu_j) / sqrt(var(X_i - X_j)))`.
    ///
    /// # Errors
    /// Item validation errors; [`CoreError::ZeroVariancePair`] when the
    /// difference variance is below `RANK_TOL` relative to the per-item
    /// variance scale.
    pub fn pairwise_probability(&self, i: usize, j: usize) -> CoreResult<f64> {
        self.validate_items(&[i, j], 2)?;
        let sigma = self.sigma();
        let diff_var = sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)];
        let scale = (sigma.trace().abs() / self.n() as f64).max(1.0);
        if diff_var <= RANK_TOL * scale {
            return Err(CoreError::ZeroVariancePair { i, j });
        }
        Ok(normal::cdf(
            (self.mu()[i] - self.mu()[j]) / diff_var.sqrt(),
        ))
    }

    /// Probabilities of all six orderings of the items `(i, j, k)`.
    ///
    /// # Arguments
    /// * `cfg` - angular quadrature accuracy; the probabilities sum to 1
    ///   within roughly six times the per-sector tolerance.
    ///
    /// # Errors
    /// [`CoreError::NotNormalized`] for unnormalized models, item validation
    /// errors, and quadrature/degeneracy errors.
    pub fn triple_rank_probabilities(
        &self,
        i: usize,
        j: usize,
        k: usize,
        cfg: &QuadConfig,
    ) -> CoreResult<RankDistribution3> {
        if !self.is_normalized() {
            return Err(CoreError::NotNormalized {
                detail: "triple ranking probabilities require a normalized model".into(),
            });
        }
        let (mu3, sigma3) = self.restrict(&[i, j, k])?;
        let probs = triple_distribution_from_restriction(&mu3, &sigma3, cfg)?;
        Ok(RankDistribution3::new([i, j, k], probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Means (1,2,3) with identity covariance, normalized.
    fn model_a() -> ProbitModel {
        let model = ProbitModel::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        model.normalize().unwrap().0
    }

    /// A zero-mean normalized covariance with distinct pair variances.
    fn model_b() -> ProbitModel {
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[1.4, -1.0, -0.4, -1.0, 1.1, -0.1, -0.4, -0.1, 0.5],
        );
        let model = ProbitModel::new(DVector::zeros(3), sigma).unwrap();
        let (normalized, report) = model.normalize().unwrap();
        assert!((report.t - 1.0).abs() < 1e-12, "input is already canonical");
        normalized
    }

    // 30-digit reference distributions (tools/reference_values.py), ordered
    // as PERMUTATIONS3 over the triple (0, 1, 2).
    const MODEL_A_PROBS: [f64; 6] = [
        0.015651756313034322,
        0.031498923606054122,
        0.031498923606054122,
        0.19259938117438829,
        0.19259938117438829,
        0.5361516341260809,
    ];
    const MODEL_B_PROBS: [f64; 6] = [
        0.14102355421224373,
        0.25,
        0.10897644578775627,
        0.25,
        0.10897644578775627,
        0.14102355421224373,
    ];

    #[test]
    fn ordering_probabilities_match_reference_for_linear_means() {
        let cfg = QuadConfig::with_tolerance(1e-11);
        let dist = model_a().triple_rank_probabilities(0, 1, 2, &cfg).unwrap();
        for (got, expected) in dist.probs().iter().zip(&MODEL_A_PROBS) {
            assert_abs_diff_eq!(got, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn ordering_probabilities_match_reference_for_zero_mean_covariance() {
        let cfg = QuadConfig::with_tolerance(1e-11);
        let dist = model_b().triple_rank_probabilities(0, 1, 2, &cfg).unwrap();
        for (got, expected) in dist.probs().iter().zip(&MODEL_B_PROBS) {
            assert_abs_diff_eq!(got, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn exchangeable_model_is_uniform_over_orderings() {
        let sigma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.5 });
        let model = ProbitModel::new(DVector::zeros(3), sigma).unwrap();
        let model = model.normalize().unwrap().0;
        let dist = model
            .triple_rank_probabilities(0, 1, 2, &QuadConfig::default())
            .unwrap();
        for &p in dist.probs() {
            assert_abs_diff_eq!(p, 1.0 / 6.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn triple_order_is_respected_in_lookup() {
        let cfg = QuadConfig::default();
        let dist = model_a().triple_rank_probabilities(0, 1, 2, &cfg).unwrap();
        // Presenting the same items in another order permutes the labels but
        // not the underlying event probabilities.
        let flipped = model_a().triple_rank_probabilities(2, 0, 1, &cfg).unwrap();
        let order = [2usize, 1, 0];
        assert_abs_diff_eq!(
            dist.prob_of_order(order).unwrap(),
            flipped.prob_of_order(order).unwrap(),
            epsilon = 1e-9
        );
        assert_eq!(dist.prob_of_order([0, 1, 1]), None);
    }

    #[test]
    fn pairwise_probabilities_match_reference() {
        let m = model_a();
        // Adjacent items: Phi(-1/sqrt(2)); extreme items: Phi(-sqrt(2)).
        // Both also equal sums of the reference six-way probabilities.
        assert_abs_diff_eq!(
            m.pairwise_probability(0, 1).unwrap(),
            0.23975006109347673,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            m.pairwise_probability(1, 2).unwrap(),
            0.23975006109347673,
            epsilon = 1e-12
        );
        let extreme = 0.015651756313034322 + 0.031498923606054122 + 0.031498923606054122;
        assert_abs_diff_eq!(
            m.pairwise_probability(0, 2).unwrap(),
            extreme,
            epsilon = 1e-10
        );
        // Complementarity.
        let p = m.pairwise_probability(2, 0).unwrap();
        assert_abs_diff_eq!(
            p + m.pairwise_probability(0, 2).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pairwise_probability_validates() {
        let m = model_a();
        assert!(matches!(
            m.pairwise_probability(1, 1),
            Err(CoreError::DuplicateItems { .. })
        ));
        assert!(matches!(
            m.pairwise_probability(0, 9),
            Err(CoreError::ItemOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_mean_model_has_half_pairwise_probabilities() {
        let m = model_b();
        for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
            assert_abs_diff_eq!(m.pairwise_probability(i, j).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn unnormalized_models_are_rejected_for_triples() {
        let raw = ProbitModel::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        assert!(matches!(
            raw.triple_rank_probabilities(0, 1, 2, &QuadConfig::default()),
            Err(CoreError::NotNormalized { .. })
        ));
    }

    #[test]
    fn tv_distance_is_zero_on_self_and_positive_across_models() {
        let cfg = QuadConfig::default();
        let a = model_a().triple_rank_probabilities(0, 1, 2, &cfg).unwrap();
        let b = model_b().triple_rank_probabilities(0, 1, 2, &cfg).unwrap();
        assert_abs_diff_eq!(a.tv_distance(&a), 0.0, epsilon = 1e-15);
        assert!(a.tv_distance(&b) > 0.1);
    }
}
