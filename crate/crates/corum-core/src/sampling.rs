//! Seeded utility sampling, ranking draws, and rejection-based conditional
//! comparison estimates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, CoreResult};
use crate::linalg::psd_sqrt_factor;
use crate::model::ProbitModel;

/// Relative clip tolerance for negative covariance eigenvalues in the
/// sampling factorization.
const SAMPLING_NEGATIVITY_TOL: f64 = 1e-9;

/// A ranking of a subset of items, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    /// Builds a ranking; entries must be pairwise distinct.
    pub fn new(order: Vec<usize>) -> CoreResult<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::DuplicateItems { items: order });
        }
        Ok(Self { order })
    }

    /// Items best-first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of ranked items.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Whether the ranking covers no items.
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Budget for rejection-sampled conditional estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RejectionBudget {
    /// Stop once this many draws matched the conditioning event.
    pub target_accepted: u64,
    /// Hard cap on proposals, bounding runtime.
    pub max_proposals: u64,
}

impl Default for RejectionBudget {
    /// Adaptive default: at least 200 accepted draws, at most 10^7 proposals.
    fn default() -> Self {
        Self {
            target_accepted: 200,
            max_proposals: 10_000_000,
        }
    }
}

/// Result of a rejection-sampled conditional comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEstimate {
    /// Fraction of accepted draws in which item `i` beat item `j`.
    pub probability: f64,
    /// Number of draws matching the conditioning event.
    pub accepted: u64,
    /// Total proposals drawn.
    pub proposals: u64,
}

/// Draws utility vectors `X ~ N(mu, sigma)` from a seeded stream.
///
/// The covariance is factored through its eigendecomposition; negative
/// eigenvalues within `1e-9` of zero relative to the trace are clipped,
/// larger negativity is an error.
pub struct UtilitySampler {
    mu: DVector<f64>,
    factor: DMatrix<f64>,
    rng: ChaCha8Rng,
}

impl UtilitySampler {
    /// Prepares a sampler for `model` with a deterministic seed.
    ///
    /// # Errors
    /// [`CoreError::IndefiniteCovariance`] when the covariance has a
    /// materially negative eigenvalue.
    pub fn new(model: &ProbitModel, seed: u64) -> CoreResult<Self> {
        let factor = psd_sqrt_factor(model.sigma(), SAMPLING_NEGATIVITY_TOL)?;
        Ok(Self {
            mu: model.mu().clone(),
            factor,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Draws one utility vector.
    pub fn draw(&mut self) -> DVector<f64> {
        let n = self.mu.len();
        let z = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal));
        &self.mu + &self.factor * z
    }
}

/// Sorts `subset` by descending utility in `x`; exact ties (measure zero,
/// but reachable in degenerate tests) break toward the smaller item index.
pub(crate) fn rank_subset(x: &DVector<f64>, subset: &[usize]) -> Ranking {
    let mut order = subset.to_vec();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    Ranking { order }
}

/// Whether the utilities in `x` realize the context ordering.
fn context_holds(x: &DVector<f64>, context: &Ranking) -> bool {
    context.order().windows(2).all(|w| x[w[0]] > x[w[1]])
}

impl ProbitModel {
    /// Draws one ranking per presented subset from a fresh utility vector.
    ///
    /// # Arguments
    /// * `subsets` - presented item subsets, each of size at least 2.
    /// * `seed` - RNG seed; equal seeds give equal output.
    ///
    /// # Errors
    /// [`CoreError::NotNormalized`] for unnormalized models, subset
    /// validation errors, and covariance factorization errors.
    pub fn sample_rankings(&self, subsets: &[Vec<usize>], seed: u64) -> CoreResult<Vec<Ranking>> {
        if !self.is_normalized() {
            return Err(CoreError::NotNormalized {
                detail: "ranking sampling requires a normalized model".into(),
            });
        }
        for subset in subsets {
            self.validate_items(subset, 2)?;
        }
        let mut sampler = UtilitySampler::new(self, seed)?;
        Ok(subsets
            .iter()
            .map(|subset| rank_subset(&sampler.draw(), subset))
            .collect())
    }

    /// Estimates `P{X_i > X_j | context ordering holds}` by rejection
    /// sampling: draws utility vectors, keeps those whose restriction to the
    /// context items matches the context ordering, and reports the fraction
    /// of kept draws with `X_i > X_j`.
    ///
    /// # Arguments
    /// * `context` - conditioning ranking; an empty context estimates the
    ///   unconditional comparison.
    /// * `budget` - acceptance target and proposal cap.
    ///
    /// # Errors
    /// [`CoreError::ContextOverlap`] when `i` or `j` appears in the context;
    /// [`CoreError::NoAcceptedSamples`] when no proposal matches the context
    /// (an observability failure); validation and factorization errors.
    pub fn conditional_pair_probability(
        &self,
        context: &Ranking,
        i: usize,
        j: usize,
        budget: RejectionBudget,
        seed: u64,
    ) -> CoreResult<ConditionalEstimate> {
        self.validate_items(&[i, j], 2)?;
        self.validate_items(context.order(), 0)?;
        for &item in [i, j].iter() {
            if context.order().contains(&item) {
                return Err(CoreError::ContextOverlap { item });
            }
        }
        let mut sampler = UtilitySampler::new(self, seed)?;
        let mut proposals = 0u64;
        let mut accepted = 0u64;
        let mut wins = 0u64;
        while accepted < budget.target_accepted && proposals < budget.max_proposals {
            let x = sampler.draw();
            proposals += 1;
            if context_holds(&x, context) {
                accepted += 1;
                if x[i] > x[j] {
                    wins += 1;
                }
            }
        }
        if accepted == 0 {
            return Err(CoreError::NoAcceptedSamples { proposals });
        }
        Ok(ConditionalEstimate {
            probability: wins as f64 / accepted as f64,
            accepted,
            proposals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn normalized(mu: Vec<f64>, sigma: DMatrix<f64>) -> ProbitModel {
        ProbitModel::new(DVector::from_vec(mu), sigma)
            .unwrap()
            .normalize()
            .unwrap()
            .0
    }

    #[test]
    fn dominant_means_sort_deterministically() {
        // Tiny on-hyperplane noise: normalization scales the means up by the
        // inverse noise scale, so the mean ordering wins essentially always.
        let sigma = DMatrix::from_fn(3, 3, |i, j| {
            let m = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
            1e-8 * m
        });
        let model = normalized(vec![0.0, 1.0, 2.0], sigma);
        assert!(model.mu()[2] > 1e3, "normalization should amplify the means");
        let subsets = vec![vec![0usize, 1, 2]; 10_000];
        let rankings = model.sample_rankings(&subsets, 11).unwrap();
        let expected = Ranking::new(vec![2, 1, 0]).unwrap();
        let hits = rankings.iter().filter(|r| **r == expected).count();
        assert!(
            hits >= 9990,
            "dominant-mean ordering frequency too low: {hits}/10000"
        );
    }

    #[test]
    fn exchangeable_orderings_are_uniform() {
        let sigma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.5 });
        let model = normalized(vec![0.0; 3], sigma);
        let draws = 600_000usize;
        let subsets = vec![vec![0usize, 1, 2]; draws];
        let rankings = model.sample_rankings(&subsets, 5).unwrap();
        let mut counts = std::collections::HashMap::<Vec<usize>, usize>::new();
        for r in rankings {
            *counts.entry(r.order().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        // 4 sigma binomial band around 1/6.
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for (_, count) in counts {
            assert!(
                (count as f64 - draws as f64 * p).abs() <= 4.0 * sd,
                "ordering frequency outside 4 sigma: {count}"
            );
        }
    }

    #[test]
    fn equal_seeds_reproduce_and_distinct_seeds_differ() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let model = ProbitModel::random_normalized(4, &mut rng);
        let subsets = vec![vec![0usize, 1, 2, 3]; 50];
        let a = model.sample_rankings(&subsets, 99).unwrap();
        let b = model.sample_rankings(&subsets, 99).unwrap();
        let c = model.sample_rankings(&subsets, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn subset_validation_is_enforced() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let model = ProbitModel::random_normalized(3, &mut rng);
        assert!(matches!(
            model.sample_rankings(&[vec![0]], 0),
            Err(CoreError::SubsetTooSmall { len: 1 })
        ));
        assert!(matches!(
            model.sample_rankings(&[vec![0, 7]], 0),
            Err(CoreError::ItemOutOfRange { .. })
        ));
    }

    #[test]
    fn tie_breaking_is_by_item_index() {
        let x = DVector::from_vec(vec![1.0, 2.0, 2.0, 0.0]);
        let r = rank_subset(&x, &[3, 2, 1, 0]);
        assert_eq!(r.order(), &[1, 2, 0, 3]);
    }

    #[test]
    fn empty_context_matches_pairwise_probability() {
        let model = normalized(vec![0.3, -0.3], DMatrix::identity(2, 2));
        let est = model
            .conditional_pair_probability(
                &Ranking::new(vec![]).unwrap(),
                0,
                1,
                RejectionBudget {
                    target_accepted: 200_000,
                    max_proposals: 300_000,
                },
                7,
            )
            .unwrap();
        let exact = model.pairwise_probability(0, 1).unwrap();
        let sd = (exact * (1.0 - exact) / est.accepted as f64).sqrt();
        assert!(
            (est.probability - exact).abs() <= 4.0 * sd,
            "unconditional estimate {} too far from {exact}",
            est.probability
        );
        assert_eq!(est.accepted, 200_000);
    }

    #[test]
    fn exchangeable_context_leaves_pair_at_half() {
        let n = 6;
        let sigma = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                -1.0 / (n as f64 - 1.0)
            }
        });
        let model = normalized(vec![0.0; n], sigma);
        let context = Ranking::new(vec![0, 1, 2, 3]).unwrap();
        let est = model
            .conditional_pair_probability(&context, 4, 5, RejectionBudget::default(), 13)
            .unwrap();
        assert!(est.accepted >= RejectionBudget::default().target_accepted);
        let sd = 0.5 / (est.accepted as f64).sqrt();
        assert!(
            (est.probability - 0.5).abs() <= 4.0 * sd,
            "estimate {} outside 4 sigma of 1/2",
            est.probability
        );
    }

    #[test]
    fn context_overlap_and_starvation_are_reported() {
        let model = normalized(vec![0.0; 4], DMatrix::identity(4, 4));
        let context = Ranking::new(vec![0, 1]).unwrap();
        assert!(matches!(
            model.conditional_pair_probability(&context, 1, 3, RejectionBudget::default(), 0),
            Err(CoreError::ContextOverlap { item: 1 })
        ));
        let starving = RejectionBudget {
            target_accepted: 10,
            max_proposals: 0,
        };
        assert!(matches!(
            model.conditional_pair_probability(&context, 2, 3, starving, 0),
            Err(CoreError::NoAcceptedSamples { .. })
        ));
    }

    #[test]
    fn ranking_rejects_duplicates() {
        assert!(matches!(
            Ranking::new(vec![1, 2, 1]),
            Err(CoreError::DuplicateItems { .. })
        ));
    }

    #[test]
    fn sampler_covariance_matches_model() {
        // Empirical second moments of a correlated model converge to sigma.
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[1.4, -1.0, -0.4, -1.0, 1.1, -0.1, -0.4, -0.1, 0.5],
        );
        let model = normalized(vec![0.0; 3], sigma.clone());
        let mut sampler = UtilitySampler::new(&model, 21).unwrap();
        let draws = 200_000;
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..draws {
            let x = sampler.draw();
            acc += &x * x.transpose();
        }
        acc /= draws as f64;
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(acc[(i, j)], sigma[(i, j)], epsilon = 0.02);
            }
        }
    }
}
