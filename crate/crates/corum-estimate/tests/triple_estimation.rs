//! Three-item estimation against independent routes: direct whitening
//! computations, the integration engine, and seeded sampling.

use approx::assert_abs_diff_eq;
use corum_core::integrate::QuadConfig;
use corum_core::model::ProbitModel;
use corum_estimate::{
    estimate_triple_with, exact_frequencies, reconstruct_three, ModelSamplingSource,
    SampleSource, ThreeItemEstimate, TripleConfig, DIFF_PAIRS,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Difference vectors of a three-item menu: first-second, second-third,
/// first-third.
const DIFFS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

/// Mean offsets and pairwise inner products of the whitened difference
/// directions, computed directly from the model parameters.
fn whitened_stats(model: &ProbitModel) -> ([f64; 3], [f64; 3]) {
    let form = |p: (usize, usize), q: (usize, usize)| {
        let c = |(a, b): (usize, usize)| {
            let mut v = DVector::zeros(3);
            v[a] = 1.0;
            v[b] = -1.0;
            v
        };
        (c(p).transpose() * model.sigma() * c(q))[(0, 0)]
    };
    let mut alphas = [0.0; 3];
    for (k, &pair) in DIFFS.iter().enumerate() {
        let (a, b) = pair;
        alphas[k] = (model.mu()[a] - model.mu()[b]) / form(pair, pair).sqrt();
    }
    let mut betas = [0.0; 3];
    for (k, &(p, q)) in DIFF_PAIRS.iter().enumerate() {
        betas[k] =
            form(DIFFS[p], DIFFS[q]) / (form(DIFFS[p], DIFFS[p]) * form(DIFFS[q], DIFFS[q])).sqrt();
    }
    (alphas, betas)
}

/// Draws normalized three-item models whose rarest ordering stays above
/// `gamma_floor`.
fn observable_model(seed: u64, gamma_floor: f64) -> ProbitModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = QuadConfig::default();
    loop {
        let model = ProbitModel::random_normalized(3, &mut rng);
        let dist = model.triple_rank_probabilities(0, 1, 2, &quad).unwrap();
        if dist.probs().iter().all(|&p| p >= gamma_floor) {
            return model;
        }
    }
}

fn estimate_exact(model: &ProbitModel) -> ThreeItemEstimate {
    let quad = QuadConfig::with_tolerance(1e-10);
    let freqs = exact_frequencies(model, [0, 1, 2], &quad).unwrap();
    estimate_triple_with(&freqs, &TripleConfig::default())
        .unwrap()
        .0
}

#[test]
fn offsets_and_angles_match_direct_whitening() {
    for seed in 0..10u64 {
        let model = observable_model(1000 + seed, 0.01);
        let est = estimate_exact(&model);
        let (alphas, betas) = whitened_stats(&model);
        for k in 0..3 {
            assert_abs_diff_eq!(est.alphas()[k], alphas[k], epsilon = 1e-6);
            assert_abs_diff_eq!(est.betas()[k], betas[k], epsilon = 1e-5);
        }
    }
}

#[test]
fn exact_offsets_and_angles_reconstruct_the_model_algebraically() {
    // With noise-free inputs the reconstruction is exact linear algebra,
    // so the tolerance is machine-level rather than statistical.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let model = ProbitModel::random_normalized(3, &mut rng);
        let (alphas, betas) = whitened_stats(&model);
        let est = reconstruct_three(alphas, betas, 1e-6).unwrap();
        let (mu, sigma) = est.rescaled_to_trace(3.0);
        assert!((mu - model.mu()).amax() < 1e-9);
        assert!((sigma - model.sigma()).amax() < 1e-9);
    }
}

#[test]
fn exact_probabilities_identify_the_model() {
    for seed in 0..10u64 {
        let model = observable_model(2000 + seed, 0.01);
        let est = estimate_exact(&model);
        let (mu, sigma) = est.rescaled_to_trace(3.0);
        assert!(
            (&mu - model.mu()).amax() < 1e-4,
            "mean error {} at seed {seed}",
            (&mu - model.mu()).amax()
        );
        assert!(
            (&sigma - model.sigma()).amax() < 1e-4,
            "covariance error {} at seed {seed}",
            (&sigma - model.sigma()).amax()
        );
    }
}

#[test]
fn rescaled_models_give_identical_rankings_and_estimates() {
    // (t mu, t^2 sigma) defines the same choice law; its normalization and
    // therefore its estimate agree with the original's. Identical
    // frequencies give bitwise identical estimates.
    let model = observable_model(31, 0.02);
    let scaled = ProbitModel::new(model.mu() * 3.0, model.sigma() * 9.0)
        .unwrap()
        .normalize()
        .unwrap()
        .0;
    let quad = QuadConfig::with_tolerance(1e-10);
    let base = model.triple_rank_probabilities(0, 1, 2, &quad).unwrap();
    let redone = scaled.triple_rank_probabilities(0, 1, 2, &quad).unwrap();
    for k in 0..6 {
        assert_abs_diff_eq!(base.probs()[k], redone.probs()[k], epsilon = 1e-9);
    }
    let est_a = estimate_exact(&model);
    let est_b = estimate_exact(&scaled);
    assert!((est_a.sigma() - est_b.sigma()).amax() < 1e-6);

    // Same frequency input twice: bitwise equal output.
    let freqs = exact_frequencies(&model, [0, 1, 2], &quad).unwrap();
    let (one, _) = estimate_triple_with(&freqs, &TripleConfig::default()).unwrap();
    let (two, _) = estimate_triple_with(&freqs, &TripleConfig::default()).unwrap();
    assert!(one
        .mu()
        .iter()
        .zip(two.mu().iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(one
        .sigma()
        .iter()
        .zip(two.sigma().iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(one.trace().to_bits(), two.trace().to_bits());
}

#[test]
fn relabeling_items_permutes_the_estimate() {
    let model = observable_model(47, 0.02);
    // Relabel items by new position -> old item.
    let perm = [2usize, 0, 1];
    let mu_p = DVector::from_fn(3, |i, _| model.mu()[perm[i]]);
    let sigma_p = DMatrix::from_fn(3, 3, |i, j| model.sigma()[(perm[i], perm[j])]);
    let permuted = ProbitModel::new(mu_p, sigma_p).unwrap().normalize().unwrap().0;

    let (mu_a, sigma_a) = estimate_exact(&model).rescaled_to_trace(3.0);
    let (mu_b, sigma_b) = estimate_exact(&permuted).rescaled_to_trace(3.0);
    for i in 0..3 {
        assert_abs_diff_eq!(mu_b[i], mu_a[perm[i]], epsilon = 1e-4);
        for j in 0..3 {
            assert_abs_diff_eq!(sigma_b[(i, j)], sigma_a[(perm[i], perm[j])], epsilon = 1e-4);
        }
    }
}

#[test]
fn small_input_perturbations_stay_bounded() {
    // Offsets and angles moved by 1e-3 must not blow up the normalized
    // reconstruction on well-observable models.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..10u64 {
        let model = observable_model(3000 + seed, 0.05);
        let (alphas, betas) = whitened_stats(&model);
        let (base_mu, base_sigma) = reconstruct_three(alphas, betas, 1e-6)
            .unwrap()
            .rescaled_to_trace(3.0);
        let eps = 1e-3;
        let jitter = |v: f64, rng: &mut ChaCha8Rng| {
            v + if rng.gen_bool(0.5) { eps } else { -eps }
        };
        let alphas_p = alphas.map(|v| jitter(v, &mut rng));
        let betas_p = betas.map(|v| jitter(v, &mut rng).clamp(-0.999, 0.999));
        let (mu_p, sigma_p) = reconstruct_three(alphas_p, betas_p, 1e-6)
            .unwrap()
            .rescaled_to_trace(3.0);
        assert!(
            (mu_p - base_mu).amax() < 1.0,
            "mean sensitivity blew up at seed {seed}"
        );
        assert!(
            (sigma_p - base_sigma).amax() < 1.0,
            "covariance sensitivity blew up at seed {seed}"
        );
    }
}

fn exchangeable3() -> ProbitModel {
    // I.i.d. utilities normalized: covariance (n/(n-1)) (I - J/n).
    let sigma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.5 });
    ProbitModel::new(DVector::zeros(3), sigma)
        .unwrap()
        .normalize()
        .unwrap()
        .0
}

#[test]
fn sampled_exchangeable_estimate_lands_near_truth() {
    let model = exchangeable3();
    let source = ModelSamplingSource::new(&model, 77);
    let freqs = source.triple_frequencies([0, 1, 2], 1_000_000).unwrap();
    let (est, report) = estimate_triple_with(&freqs, &TripleConfig::default()).unwrap();
    assert!(report.gamma_hat > 0.15, "gamma_hat = {}", report.gamma_hat);
    let (mu, sigma) = est.rescaled_to_trace(3.0);
    assert!((&mu - model.mu()).amax() < 0.03);
    assert!((&sigma - model.sigma()).amax() < 0.03);
}

#[test]
fn sampled_random_model_estimate_lands_near_truth() {
    let model = observable_model(61, 0.05);
    let source = ModelSamplingSource::new(&model, 78);
    let freqs = source.triple_frequencies([0, 1, 2], 1_000_000).unwrap();
    let (est, _) = estimate_triple_with(&freqs, &TripleConfig::default()).unwrap();
    let (mu, sigma) = est.rescaled_to_trace(3.0);
    assert!((&mu - model.mu()).amax() < 0.05);
    assert!((&sigma - model.sigma()).amax() < 0.05);
}

#[test]
fn estimation_error_decays_like_root_n() {
    // Median l-inf error over seeds at dyadic budgets; the log-log slope
    // against the sample count should sit near -1/2.
    let model = exchangeable3();
    let budgets = [10_000u64, 40_000, 160_000, 640_000];
    let mut medians = Vec::new();
    for (step, &budget) in budgets.iter().enumerate() {
        let mut errors: Vec<f64> = (0..5u64)
            .map(|rep| {
                let source = ModelSamplingSource::new(&model, 900 + 37 * rep + step as u64);
                let freqs = source.triple_frequencies([0, 1, 2], budget).unwrap();
                let (est, _) =
                    estimate_triple_with(&freqs, &TripleConfig::default()).unwrap();
                let (mu, sigma) = est.rescaled_to_trace(3.0);
                (&sigma - model.sigma()).amax().max((&mu - model.mu()).amax())
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        medians.push(errors[2]);
    }
    // Least-squares slope of log error against log budget.
    let xs: Vec<f64> = budgets.iter().map(|&b| (b as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|&e| e.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>();
    assert!(
        (slope + 0.5).abs() <= 0.15,
        "rate slope {slope} outside -0.5 +/- 0.15 (medians {medians:?})"
    );
}
