//! Bivariate Gaussian sector masses by adaptive polar quadrature.
//!
//! Ranking events for a triple of items reduce, after projection to the
//! plane, to the mass a bivariate Gaussian puts on an angular sector. Along
//! each direction the radial integral has a closed form in `Phi`, so a sector
//! mass is a one-dimensional angular integral evaluated here with adaptive
//! Simpson refinement.

use nalgebra::{Matrix2, Vector2};
use std::f64::consts::PI;

use crate::error::{CoreError, CoreResult};
use crate::linalg::invert_spd2;
use crate::normal;

/// Unit-vector tolerance for cone direction arguments.
const UNIT_TOL: f64 = 1e-9;

/// Accuracy controls for the adaptive angular quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Target absolute error per integrated angular sector.
    pub target_abs_tol: f64,
    /// Maximum bisection depth before reporting failure.
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            target_abs_tol: 1e-7,
            max_depth: 48,
        }
    }
}

impl QuadConfig {
    /// Default refinement budget with a custom absolute tolerance.
    pub fn with_tolerance(target_abs_tol: f64) -> Self {
        Self {
            target_abs_tol,
            ..Self::default()
        }
    }
}

/// A nondegenerate bivariate Gaussian prepared for polar sector integration.
#[derive(Debug, Clone)]
pub struct PlanarGaussian {
    mu: Vector2<f64>,
    inv: Matrix2<f64>,
    /// Mahalanobis norm `mu^T inv mu`.
    mahal: f64,
    /// Density normalization `1 / (2 pi sqrt(det))`.
    norm: f64,
    /// Covariance eigenvalue ratio `lambda_max / lambda_min >= 1`.
    anisotropy: f64,
}

impl PlanarGaussian {
    /// Prepares a planar Gaussian with positive definite covariance.
    ///
    /// # Errors
    /// [`CoreError::DegenerateCovariance`] when `sigma` is numerically
    /// singular.
    pub fn new(mu: Vector2<f64>, sigma: Matrix2<f64>) -> CoreResult<Self> {
        let (inv, det) = invert_spd2(&sigma)?;
        let mahal = (inv * mu).dot(&mu);
        let half_trace = 0.5 * sigma.trace();
        let spread = (half_trace * half_trace - det).max(0.0).sqrt();
        Ok(Self {
            mu,
            inv,
            mahal,
            norm: 1.0 / (2.0 * PI * det.sqrt()),
            anisotropy: (half_trace + spread) / (half_trace - spread).max(f64::MIN_POSITIVE),
        })
    }

    /// Density mass per unit angle at direction `phi`: the radial integral
    /// `int_0^inf f(r w(phi)) r dr` of the density along the ray.
    ///
    /// With `a = w' inv w`, `b = w' inv mu`, `c = mu' inv mu` the radial
    /// integral evaluates to
    /// `exp(-c/2)/a + sqrt(2 pi) b a^{-3/2} Phi(b/sqrt(a)) exp(-(c - b^2/a)/2)`.
    pub fn angular_density(&self, phi: f64) -> f64 {
        let omega = Vector2::new(phi.cos(), phi.sin());
        let io = self.inv * omega;
        let a = io.dot(&omega);
        let b = io.dot(&self.mu);
        // The exponent `c - b^2/a` is the squared inv-norm of the component
        // of `mu` orthogonal (in the inv inner product) to the ray; forming
        // that deviation explicitly keeps the subtraction accurate when the
        // mean is far from the origin, where `c` and `b^2/a` are both huge
        // and nearly equal.
        let dev = self.mu - (b / a) * omega;
        let resid = (self.inv * dev).dot(&dev).max(0.0);
        let sa = a.sqrt();
        let value = (-0.5 * self.mahal).exp() / a
            + (2.0 * PI).sqrt() * b / (a * sa) * normal::cdf(b / sa) * (-0.5 * resid).exp();
        self.norm * value
    }

    /// Probability mass of the angular sector `phi in [lo, hi]`.
    ///
    /// The sector is first cut into panels sized to the narrowest angular
    /// feature of the density — the peak around the mean direction has width
    /// about `1 / sqrt(mahal)` and covariance anisotropy adds structure at
    /// scale `1 / sqrt(anisotropy)` — so that a concentrated spike inside a
    /// wide sector cannot slip between the samples of a single panel. Each
    /// panel is then refined adaptively against its share of the tolerance.
    ///
    /// Refinement stops at the round-off floor of the density evaluations,
    /// which grows with `sqrt(mahal)`; resolution below that floor is not
    /// attainable, so demanding it would only recurse without converging.
    ///
    /// # Errors
    /// [`CoreError::IntegrationFailure`] when adaptive refinement cannot
    /// reach the configured tolerance.
    pub fn sector_probability(&self, lo: f64, hi: f64, cfg: &QuadConfig) -> CoreResult<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let sharpness = 1.0 + self.mahal.sqrt() + self.anisotropy.sqrt();
        let panels = (((hi - lo) * 0.5 * sharpness).ceil() as usize).clamp(1, 256);
        let tol = cfg.target_abs_tol / panels as f64;
        let noise_rel = 1e-14 * (1.0 + self.mahal.sqrt());
        let width = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = lo + p as f64 * width;
            let b = if p + 1 == panels {
                hi
            } else {
                lo + (p + 1) as f64 * width
            };
            total += simpson_with_floor(
                &|phi| self.angular_density(phi),
                a,
                b,
                tol,
                noise_rel,
                cfg.max_depth,
            )?;
        }
        Ok(total)
    }
}

/// Adaptive Simpson integration of a smooth function on `[a, b]`.
///
/// # Errors
/// [`CoreError::IntegrationFailure`] when the local error estimate still
/// exceeds the (bisection-halved) tolerance at maximum depth.
pub fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> CoreResult<f64> {
    simpson_with_floor(f, a, b, cfg.target_abs_tol, 0.0, cfg.max_depth)
}

/// Adaptive Simpson with a relative noise floor: a panel also counts as
/// converged once its Richardson correction falls below `noise_rel` times
/// the panel's own crude magnitude, the resolution limit for integrands
/// whose evaluations carry relative round-off of about `noise_rel`.
fn simpson_with_floor(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    noise_rel: f64,
    max_depth: u32,
) -> CoreResult<f64> {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(
        f,
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            estimate: whole,
        },
        tol,
        noise_rel,
        max_depth,
    )
}

/// One Simpson panel: endpoint/midpoint evaluations and the panel estimate.
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    estimate: f64,
}

fn refine(
    f: &impl Fn(f64) -> f64,
    panel: Panel,
    tol: f64,
    noise_rel: f64,
    depth: u32,
) -> CoreResult<f64> {
    let m = 0.5 * (panel.a + panel.b);
    let lm = 0.5 * (panel.a + m);
    let rm = 0.5 * (m + panel.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - panel.a) / 6.0 * (panel.fa + 4.0 * flm + panel.fm);
    let right = (panel.b - m) / 6.0 * (panel.fm + 4.0 * frm + panel.fb);
    let delta = left + right - panel.estimate;
    // Standard Richardson criterion: the refined estimate has error about
    // delta / 15. The noise floor recognizes when delta is dominated by
    // round-off in the integrand values, which subdividing cannot reduce.
    let scale = panel
        .fa
        .abs()
        .max(panel.fm.abs())
        .max(panel.fb.abs())
        .max(flm.abs())
        .max(frm.abs());
    let floor = noise_rel * scale * (panel.b - panel.a);
    if delta.abs() <= 15.0 * tol + floor {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(CoreError::IntegrationFailure {
            achieved: delta.abs() / 15.0,
            target: tol,
        });
    }
    let left_panel = Panel {
        a: panel.a,
        b: m,
        fa: panel.fa,
        fm: flm,
        fb: panel.fm,
        estimate: left,
    };
    let right_panel = Panel {
        a: m,
        b: panel.b,
        fa: panel.fm,
        fm: frm,
        fb: panel.fb,
        estimate: right,
    };
    Ok(refine(f, left_panel, 0.5 * tol, noise_rel, depth - 1)?
        + refine(f, right_panel, 0.5 * tol, noise_rel, depth - 1)?)
}

/// Validates that `u` has unit norm within tolerance.
fn require_unit(u: Vector2<f64>) -> CoreResult<()> {
    let norm = u.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(CoreError::NotUnitVector { norm });
    }
    Ok(())
}

/// Closed-form mass of the cone `{v: <u1,v> >= 0, <u2,v> >= 0}` under the
/// standard bivariate Gaussian: `1/2 - arccos(<u1,u2>) / (2 pi)`.
///
/// # Arguments
/// * `u1`, `u2` - unit halfplane normals, not (anti-)parallel.
///
/// # Returns
/// A value in `(0, 1/2)`.
///
/// # Errors
/// [`CoreError::NotUnitVector`], [`CoreError::ParallelDirections`].
pub fn cone_probability_zero_mean(u1: Vector2<f64>, u2: Vector2<f64>) -> CoreResult<f64> {
    require_unit(u1)?;
    require_unit(u2)?;
    let dot = u1.dot(&u2);
    if dot.abs() >= 1.0 - UNIT_TOL {
        return Err(CoreError::ParallelDirections {
            abs_dot: dot.abs(),
        });
    }
    Ok(0.5 - dot.acos() / (2.0 * PI))
}

/// Mass of the cone `{v: <u1,v> >= 0, <u2,v> >= 0}` under `N(mu, sigma)`,
/// by polar quadrature over the wedge between the two halfplane boundaries.
///
/// # Errors
/// Direction validation as in [`cone_probability_zero_mean`]; covariance and
/// quadrature errors propagate.
pub fn cone_probability(
    mu: Vector2<f64>,
    sigma: Matrix2<f64>,
    u1: Vector2<f64>,
    u2: Vector2<f64>,
    cfg: &QuadConfig,
) -> CoreResult<f64> {
    require_unit(u1)?;
    require_unit(u2)?;
    let dot = u1.dot(&u2);
    if dot.abs() >= 1.0 - UNIT_TOL {
        return Err(CoreError::ParallelDirections {
            abs_dot: dot.abs(),
        });
    }
    // {v: <u,v> >= 0} in polar terms is the arc of width pi centered on the
    // direction of u; intersect the two arcs.
    let a1 = u1.y.atan2(u1.x);
    let mut delta = u2.y.atan2(u2.x) - a1;
    while delta > PI {
        delta -= 2.0 * PI;
    }
    while delta <= -PI {
        delta += 2.0 * PI;
    }
    let (lo, hi) = if delta >= 0.0 {
        (a1 + delta - 0.5 * PI, a1 + 0.5 * PI)
    } else {
        (a1 - 0.5 * PI, a1 + delta + 0.5 * PI)
    };
    let gaussian = PlanarGaussian::new(mu, sigma)?;
    gaussian.sector_probability(lo, hi, cfg)
}
