//! Cross-route consistency checks for the ranking-probability engine.
//!
//! Every probability here is computed along two independent paths — the
//! production triple engine versus direct quadrant/cone integrals, closed
//! forms versus quadrature, and analytic values versus Monte Carlo — so a
//! bug in any single route cannot cancel out.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corum_core::integrate::{cone_probability, cone_probability_zero_mean, QuadConfig};
use corum_core::model::ProbitModel;
use corum_core::sampling::{Ranking, RejectionBudget, UtilitySampler};
use corum_core::triple::PERMUTATIONS3;

/// Random raw model: mean in [-2, 2]^n, covariance W W^T + I/2.
fn random_raw_model(n: usize, rng: &mut ChaCha8Rng) -> ProbitModel {
    let mu = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let w = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let sigma = &w * w.transpose() + DMatrix::identity(n, n) * 0.5;
    ProbitModel::new(mu, sigma).unwrap()
}

/// `P{X_a > X_b > X_c}` as a 2-D quadrant probability of the difference
/// vector `(X_a - X_b, X_b - X_c)`, bypassing the triple engine's projection
/// and arc classification entirely.
fn quadrant_route(model: &ProbitModel, order: [usize; 3], cfg: &QuadConfig) -> f64 {
    let (mu, sigma) = model.restrict(&order).unwrap();
    let m = Vector2::new(mu[0] - mu[1], mu[1] - mu[2]);
    // Difference covariance C sigma C^T with C = [[1,-1,0],[0,1,-1]].
    let s = Matrix2::new(
        sigma[(0, 0)] - 2.0 * sigma[(0, 1)] + sigma[(1, 1)],
        sigma[(0, 1)] + sigma[(1, 2)] - sigma[(0, 2)] - sigma[(1, 1)],
        sigma[(0, 1)] + sigma[(1, 2)] - sigma[(0, 2)] - sigma[(1, 1)],
        sigma[(1, 1)] - 2.0 * sigma[(1, 2)] + sigma[(2, 2)],
    );
    cone_probability(m, s, Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), cfg).unwrap()
}

#[test]
fn triple_engine_matches_direct_quadrant_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cfg = QuadConfig::with_tolerance(1e-10);
    for trial in 0..25 {
        let n = 3 + trial % 6;
        let (model, _) = random_raw_model(n, &mut rng).normalize().unwrap();
        let triple = [0, 1 + trial % (n - 1), n - 1];
        if triple[0] == triple[1] || triple[1] == triple[2] {
            continue;
        }
        let dist = model.triple_rank_probabilities(triple[0], triple[1], triple[2], &cfg).unwrap();
        for (slot, positions) in PERMUTATIONS3.iter().enumerate() {
            let order = [
                triple[positions[0]],
                triple[positions[1]],
                triple[positions[2]],
            ];
            let direct = quadrant_route(&model, order, &cfg);
            assert!(
                (dist.probs()[slot] - direct).abs() < 1e-8,
                "trial {trial} order {order:?}: engine {} vs quadrant {direct}",
                dist.probs()[slot]
            );
        }
    }
}

#[test]
fn pairwise_closed_form_matches_triple_margins() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = QuadConfig::with_tolerance(1e-10);
    for trial in 0..20 {
        let n = 3 + trial % 5;
        let (model, _) = random_raw_model(n, &mut rng).normalize().unwrap();
        let triple = [0, 1, 2];
        let dist = model.triple_rank_probabilities(triple[0], triple[1], triple[2], &cfg).unwrap();
        // P{X_0 > X_1} marginalizes over where item 2 lands: 012, 021, 201.
        let margin = dist.prob_of_order([0, 1, 2]).unwrap()
            + dist.prob_of_order([0, 2, 1]).unwrap()
            + dist.prob_of_order([2, 0, 1]).unwrap();
        let direct = model.pairwise_probability(0, 1).unwrap();
        assert!(
            (margin - direct).abs() < 1e-8,
            "trial {trial}: margin {margin} vs pairwise {direct}"
        );
    }
}

#[test]
fn zero_mean_cone_closed_form_matches_quadrature_after_whitening() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let cfg = QuadConfig::with_tolerance(1e-11);
    for trial in 0..40 {
        let w = Matrix2::new(
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let sigma = w * w.transpose() + Matrix2::identity() * 0.3;
        let a1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a2 = a1 + rng.gen_range(0.3..2.8);
        let u1 = Vector2::new(a1.cos(), a1.sin());
        let u2 = Vector2::new(a2.cos(), a2.sin());
        let quad = cone_probability(Vector2::zeros(), sigma, u1, u2, &cfg).unwrap();
        // Whitening X = L z maps {x: <u,x> >= 0} to {z: <L^T u, z> >= 0},
        // where the angle between the mapped normals gives the closed form.
        let l = sigma.cholesky().unwrap().l();
        let v1 = (l.transpose() * u1).normalize();
        let v2 = (l.transpose() * u2).normalize();
        let closed = cone_probability_zero_mean(v1, v2).unwrap();
        assert!(
            (quad - closed).abs() < 1e-9,
            "trial {trial}: quadrature {quad} vs closed form {closed}"
        );
    }
}

/// Classifies the order of three utilities as an index into `PERMUTATIONS3`.
fn order_slot(x: &DVector<f64>, triple: [usize; 3]) -> usize {
    let mut positions = [0usize, 1, 2];
    positions.sort_by(|&p, &q| x[triple[q]].total_cmp(&x[triple[p]]));
    PERMUTATIONS3
        .iter()
        .position(|perm| *perm == positions)
        .expect("all six orders are enumerated")
}

#[test]
fn rank_probabilities_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (model, _) = random_raw_model(5, &mut rng).normalize().unwrap();
    let triple = [0, 2, 4];
    let dist = model
        .triple_rank_probabilities(triple[0], triple[1], triple[2], &QuadConfig::default())
        .unwrap();

    let draws = 4_000_000usize;
    let mut counts = [0u64; 6];
    let mut sampler = UtilitySampler::new(&model, 4455).unwrap();
    for _ in 0..draws {
        counts[order_slot(&sampler.draw(), triple)] += 1;
    }
    for slot in 0..6 {
        let p = dist.probs()[slot];
        let freq = counts[slot] as f64 / draws as f64;
        let four_sigma = 4.0 * (p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (freq - p).abs() <= four_sigma + 1e-6,
            "slot {slot}: freq {freq} vs analytic {p} (bound {four_sigma})"
        );
    }
}

#[test]
fn normalization_preserves_ranking_distributions() {
    // Rankings are invariant to common shifts and positive rescaling of the
    // utilities, so frequencies sampled from the *raw* model must match the
    // analytic distribution of its *normalized* form.
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let raw = random_raw_model(6, &mut rng);
    let (normalized, report) = raw.normalize().unwrap();
    assert!(report.t > 0.0);

    let triple = [1, 3, 5];
    let dist = normalized
        .triple_rank_probabilities(triple[0], triple[1], triple[2], &QuadConfig::default())
        .unwrap();

    let draws = 4_000_000usize;
    let mut counts = [0u64; 6];
    let mut sampler = UtilitySampler::new(&raw, 4556).unwrap();
    for _ in 0..draws {
        counts[order_slot(&sampler.draw(), triple)] += 1;
    }
    for slot in 0..6 {
        let p = dist.probs()[slot];
        let freq = counts[slot] as f64 / draws as f64;
        let four_sigma = 4.0 * (p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (freq - p).abs() <= four_sigma + 1e-6,
            "slot {slot}: raw-model freq {freq} vs normalized analytic {p}"
        );
    }
}

#[test]
fn conditional_probability_matches_frozen_block_oracle() {
    // Two blocks {0,1,2} and {3,4,5} with strong positive within-block and
    // negative cross-block correlation. Conditioning on block-one items
    // beating block-two items drags the held-out pair far from its
    // unconditional 1/2. The expected value is frozen from an independent
    // 4e8-draw simulation (se 4.5e-5).
    let n = 6;
    let s = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        0.75 * s[i] * s[j] + if i == j { 0.25 } else { 0.0 }
    });
    let raw = ProbitModel::new(DVector::zeros(n), sigma).unwrap();
    let (model, report) = raw.normalize().unwrap();
    assert!((report.t - 23.0 / 24.0).abs() < 1e-12);

    // Unconditionally the pair is exactly balanced.
    let unconditional = model.pairwise_probability(2, 5).unwrap();
    assert!((unconditional - 0.5).abs() < 1e-12);

    let context = Ranking::new(vec![0, 1, 3, 4]).unwrap();
    let budget = RejectionBudget {
        target_accepted: 300_000,
        max_proposals: 20_000_000,
    };
    let estimate = model
        .conditional_pair_probability(&context, 2, 5, budget, 97)
        .unwrap();
    assert_eq!(estimate.accepted, 300_000);
    // 300k accepted draws put the Monte Carlo se near 5.1e-4; 3.5e-3 is
    // almost seven sigma against the frozen reference.
    assert!(
        (estimate.probability - 0.915334231519528).abs() < 3.5e-3,
        "estimate {} too far from frozen oracle",
        estimate.probability
    );
    assert!(estimate.probability > unconditional + 0.35);
}
