//! Correlated probit random-utility models.
//!
//! A population's preferences are modeled by a latent Gaussian utility
//! vector `X ~ N(mu, sigma)`; presented a subset of items, a draw chooses
//! (or ranks) by utility. Unlike logit-family models, the covariance lets
//! items be substitutes or complements, which shows up in choice data only
//! through comparisons of **three or more** items at a time.
//!
//! This crate provides the model type and its canonical normalization,
//! exact pairwise and six-way triple ranking probabilities (closed form and
//! adaptive polar quadrature), seeded sampling of ranking data, rejection
//! estimates of context-conditional comparisons, and expected-maximum
//! welfare search over menus.

pub mod error;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod sampling;
pub mod triple;
pub mod welfare;

pub use error::{CoreError, CoreResult};
pub use integrate::{
    adaptive_simpson, cone_probability, cone_probability_zero_mean, PlanarGaussian, QuadConfig,
};
pub use model::{ProbitModel, ScaleReport, RANK_TOL};
pub use sampling::{ConditionalEstimate, Ranking, RejectionBudget, UtilitySampler};
pub use triple::{RankDistribution3, PERMUTATIONS3, PERM_LABELS};
pub use welfare::{MenuValue, WelfareQuery, WelfareTable, MENU_ENUMERATION_CAP};
