//! Correlated probit model: construction, normalization, the first-difference
//! form, subset restriction, and JSON (de)serialization.
//!
//! A model is a latent Gaussian utility vector `X ~ N(mu, sigma)`; choices
//! from a presented subset are `argmax` over the restricted coordinates.
//! Choice distributions are invariant under adding a constant to all
//! utilities and under positive rescaling, so every model has a canonical
//! *normalized* representative with
//!
//! * `<mu, 1> = 0`,
//! * `sigma * 1 = 0`,
//! * `Tr(sigma) = n`,
//! * `sigma` positive semidefinite with rank exactly `n - 1`.
//!
//! The *first-difference form* is an alternative canonical representative
//! with coordinate 0 pinned to zero (`mu[0] = 0`, row/column 0 of `sigma`
//! zero, `Tr(sigma) = n - 1`); it is convenient for constructing model
//! families that share all pairwise choice probabilities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{CoreError, CoreResult};
use crate::linalg::{center_vector, max_asymmetry, sorted_symmetric_eigen};

/// Relative tolerance (to the trace) below which the hyperplane-restricted
/// covariance is declared singular.
pub const RANK_TOL: f64 = 1e-8;

/// Relative symmetry tolerance for covariance inputs.
const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Absolute tolerance for the first-difference-form precondition checks.
const DIFF_FORM_TOL: f64 = 1e-6;

/// Per-item absolute tolerance used when validating a loaded model that
/// claims to be normalized.
const LOAD_ABS_TOL: f64 = 1e-9;

/// A correlated probit random-utility model over `n` items.
///
/// Construction validates symmetry; [`ProbitModel::normalize`] produces the
/// canonical representative described in the module docs. Operations that
/// require normalization say so and reject other inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbitModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    normalized: bool,
}

/// How [`ProbitModel::normalize`] transformed a model.
///
/// Ranking distributions are invariant under this transformation: the mean
/// offset shifts all utilities equally and the variance scale `t` rescales
/// them jointly, neither of which can change any `argmax`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleReport {
    /// Multiplicative variance factor: the input's projected covariance
    /// equals `t` times the returned covariance.
    pub t: f64,
    /// Constant subtracted from every utility mean.
    pub mean_offset: f64,
}

/// On-disk JSON layout: `{"n": .., "mu": [..], "sigma": [[..]], "normalized": ..}`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    normalized: bool,
}

impl ProbitModel {
    /// Builds a model from a mean vector and covariance matrix.
    ///
    /// # Arguments
    /// * `mu` - utility means, length `n >= 2`.
    /// * `sigma` - `n x n` covariance; must be symmetric to `1e-12` relative
    ///   tolerance. It is stored exactly symmetrized.
    ///
    /// # Errors
    /// [`CoreError::TooFewItems`], [`CoreError::DimensionMismatch`],
    /// [`CoreError::AsymmetricCovariance`], or
    /// [`CoreError::InvalidModelData`] for non-finite entries.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> CoreResult<Self> {
        let n = mu.len();
        if n < 2 {
            return Err(CoreError::TooFewItems { n });
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(CoreError::DimensionMismatch {
                mu_len: n,
                rows: sigma.nrows(),
                cols: sigma.ncols(),
            });
        }
        if mu.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
            return Err(CoreError::InvalidModelData {
                detail: "mu and sigma entries must be finite".into(),
            });
        }
        let scale = sigma.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let asym = max_asymmetry(&sigma);
        if asym > SYMMETRY_REL_TOL * scale {
            return Err(CoreError::AsymmetricCovariance {
                max_asymmetry: asym,
            });
        }
        let mut sym = sigma;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(Self {
            mu,
            sigma: sym,
            normalized: false,
        })
    }

    /// Number of items.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Utility mean vector.
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Utility covariance matrix.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Whether this value was produced by (and still carries the invariants
    /// of) [`ProbitModel::normalize`].
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Canonicalizes the model: centers the means, projects the covariance
    /// onto the zero-sum hyperplane, and rescales so the trace equals `n`.
    ///
    /// # Returns
    /// The normalized model and a [`ScaleReport`] recording the applied
    /// transformation. Ranking distributions are unchanged.
    ///
    /// # Errors
    /// [`CoreError::DegenerateCovariance`] when the projected trace is not
    /// positive or the projected covariance has rank below `n - 1`;
    /// [`CoreError::IndefiniteCovariance`] when it has a materially negative
    /// eigenvalue.
    pub fn normalize(&self) -> CoreResult<(Self, ScaleReport)> {
        let n = self.n();
        let nf = n as f64;
        let mean_offset = self.mu.mean();
        let mu_c = center_vector(&self.mu);
        let sigma_c = project_onto_hyperplane(&self.sigma);
        let trace = sigma_c.trace();
        if trace <= RANK_TOL * self.sigma.trace().abs().max(1.0) {
            return Err(CoreError::DegenerateCovariance {
                detail: format!("projected covariance trace {trace:e} is not positive"),
            });
        }
        let t = trace / nf;
        let sigma = sigma_c / t;
        let mu = mu_c / t.sqrt();
        check_hyperplane_rank(&sigma)?;
        Ok((
            Self {
                mu,
                sigma,
                normalized: true,
            },
            ScaleReport { t, mean_offset },
        ))
    }

    /// Maps a normalized model to its first-difference form: coordinate 0
    /// pinned to zero and trace `n - 1`.
    ///
    /// # Errors
    /// [`CoreError::NotNormalized`] when the input violates the normalized
    /// invariants by more than `1e-6`.
    pub fn to_diffform(&self) -> CoreResult<Self> {
        self.check_assumption_invariants(DIFF_FORM_TOL)
            .map_err(|detail| CoreError::NotNormalized { detail })?;
        let n = self.n();
        let nf1 = (n - 1) as f64;
        // Row/column ops for I - 1 e_0^T: subtract coordinate 0 everywhere.
        // Mirror the upper triangle for bitwise symmetry.
        let mu_v = DVector::from_fn(n, |i, _| self.mu[i] - self.mu[0]);
        let mut sigma_v = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let value = self.sigma[(i, j)] - self.sigma[(0, j)] - self.sigma[(i, 0)]
                    + self.sigma[(0, 0)];
                sigma_v[(i, j)] = value;
                sigma_v[(j, i)] = value;
            }
        }
        let t = sigma_v.trace() / nf1;
        Ok(Self {
            mu: mu_v / t.sqrt(),
            sigma: sigma_v / t,
            normalized: false,
        })
    }

    /// Maps a first-difference-form model back to the normalized form.
    ///
    /// Inverse of [`ProbitModel::to_diffform`]: the round trip reproduces the
    /// original normalized model to within `1e-9` entrywise.
    ///
    /// # Errors
    /// [`CoreError::NotNormalized`] when the input violates the
    /// first-difference invariants (`mu[0] = 0`, row/column 0 of `sigma`
    /// zero, `Tr = n - 1`) by more than `1e-6`; normalization errors
    /// propagate.
    pub fn from_diffform(&self) -> CoreResult<Self> {
        let n = self.n();
        let mut worst = self.mu[0].abs();
        for j in 0..n {
            worst = worst.max(self.sigma[(0, j)].abs());
        }
        let trace_gap = (self.sigma.trace() - (n - 1) as f64).abs();
        worst = worst.max(trace_gap);
        if worst > DIFF_FORM_TOL {
            return Err(CoreError::NotNormalized {
                detail: format!(
                    "first-difference form violated by {worst:e} (need mu[0] = 0, \
                     zero row/col 0, trace = n - 1)"
                ),
            });
        }
        let (model, _) = Self {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            normalized: false,
        }
        .normalize()?;
        Ok(model)
    }

    /// Mean and covariance of the utilities restricted to `items`.
    ///
    /// # Arguments
    /// * `items` - distinct item indices, at least two.
    ///
    /// # Errors
    /// [`CoreError::ItemOutOfRange`], [`CoreError::DuplicateItems`], or
    /// [`CoreError::SubsetTooSmall`].
    pub fn restrict(&self, items: &[usize]) -> CoreResult<(DVector<f64>, DMatrix<f64>)> {
        self.validate_items(items, 2)?;
        let k = items.len();
        let mu = DVector::from_fn(k, |a, _| self.mu[items[a]]);
        let sigma = DMatrix::from_fn(k, k, |a, b| self.sigma[(items[a], items[b])]);
        Ok((mu, sigma))
    }

    /// Validates that `items` are distinct, in range, and at least `min_len` many.
    pub(crate) fn validate_items(&self, items: &[usize], min_len: usize) -> CoreResult<()> {
        if items.len() < min_len {
            return Err(CoreError::SubsetTooSmall { len: items.len() });
        }
        let n = self.n();
        for &item in items {
            if item >= n {
                return Err(CoreError::ItemOutOfRange { item, n });
            }
        }
        let mut seen = items.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::DuplicateItems {
                items: items.to_vec(),
            });
        }
        Ok(())
    }

    /// Checks the normalized-model invariants to absolute tolerance `tol`,
    /// returning a human-readable violation description on failure.
    fn check_assumption_invariants(&self, tol: f64) -> Result<(), String> {
        let n = self.n();
        let mu_sum = self.mu.sum();
        if mu_sum.abs() > tol {
            return Err(format!("<mu, 1> = {mu_sum:e} exceeds {tol:e}"));
        }
        for i in 0..n {
            let row_sum: f64 = self.sigma.row(i).iter().sum();
            if row_sum.abs() > tol {
                return Err(format!("(sigma 1)[{i}] = {row_sum:e} exceeds {tol:e}"));
            }
        }
        let trace_gap = self.sigma.trace() - n as f64;
        if trace_gap.abs() > tol {
            return Err(format!("Tr(sigma) - n = {trace_gap:e} exceeds {tol:e}"));
        }
        Ok(())
    }

    /// Draws a random normalized model: covariance `W W^T / n` for a standard
    /// normal `W`, mean standard normal, both passed through `normalize`.
    pub fn random_normalized<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let w = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = (&w * w.transpose()) / n as f64;
            let mu = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let model = Self::new(mu, sigma).expect("random model construction is well formed");
            // A Wishart draw is full rank almost surely; retry on the
            // measure-zero (numerically: astronomically rare) failure.
            if let Ok((normalized, _)) = model.normalize() {
                return normalized;
            }
        }
    }

    /// Serializes to the JSON model format.
    pub fn to_json(&self) -> String {
        let n = self.n();
        let file = ModelFile {
            n,
            mu: self.mu.iter().copied().collect(),
            sigma: (0..n)
                .map(|i| self.sigma.row(i).iter().copied().collect())
                .collect(),
            normalized: self.normalized,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// Parses and validates the JSON model format.
    ///
    /// # Errors
    /// [`CoreError::Json`] for malformed JSON, [`CoreError::InvalidModelData`]
    /// for inconsistent dimensions or a `normalized: true` model whose
    /// invariants do not hold, plus construction errors.
    pub fn from_json(text: &str) -> CoreResult<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.mu.len() != file.n
            || file.sigma.len() != file.n
            || file.sigma.iter().any(|row| row.len() != file.n)
        {
            return Err(CoreError::InvalidModelData {
                detail: format!(
                    "declared n = {} inconsistent with mu length {} or sigma shape",
                    file.n,
                    file.mu.len()
                ),
            });
        }
        let mu = DVector::from_vec(file.mu);
        let sigma = DMatrix::from_fn(file.n, file.n, |i, j| file.sigma[i][j]);
        let mut model = Self::new(mu, sigma)?;
        if file.normalized {
            let tol = LOAD_ABS_TOL * file.n as f64;
            model
                .check_assumption_invariants(tol)
                .map_err(|detail| CoreError::InvalidModelData {
                    detail: format!("model claims normalized but {detail}"),
                })?;
            check_hyperplane_rank(&model.sigma).map_err(|e| CoreError::InvalidModelData {
                detail: format!("model claims normalized but {e}"),
            })?;
            model.normalized = true;
        }
        Ok(model)
    }

    /// Writes the JSON model format to `path`.
    pub fn save(&self, path: &Path) -> CoreResult<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Reads and validates the JSON model format from `path`.
    pub fn load(path: &Path) -> CoreResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Applies the centering projector on both sides: `M sigma M`, computed
/// through row/column means. The upper triangle is mirrored so the result is
/// bitwise symmetric despite order-dependent rounding.
fn project_onto_hyperplane(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    let row_means = DVector::<f64>::from_fn(n, |i, _| sigma.row(i).mean());
    let grand_mean = row_means.mean();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let value = sigma[(i, j)] - row_means[i] - row_means[j] + grand_mean;
            out[(i, j)] = value;
            out[(j, i)] = value;
        }
    }
    out
}

/// Verifies that a trace-`n` hyperplane-supported covariance is PSD with
/// exactly one zero eigenvalue.
fn check_hyperplane_rank(sigma: &DMatrix<f64>) -> CoreResult<()> {
    let n = sigma.nrows();
    let floor = RANK_TOL * n as f64;
    let (values, _) = sorted_symmetric_eigen(sigma);
    if values[0] < -floor {
        return Err(CoreError::IndefiniteCovariance {
            eigenvalue: values[0],
            floor: -floor,
        });
    }
    if values[1] <= floor {
        return Err(CoreError::DegenerateCovariance {
            detail: format!(
                "covariance rank below n - 1: second-smallest eigenvalue {:e} <= {floor:e}",
                values[1]
            ),
        });
    }
    Ok(())
}
