//! Small linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, CoreResult};

/// Returns the centering matrix `I - (1/n) * ones`, the orthogonal projector
/// onto the zero-sum hyperplane.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 1.0 / n as f64
    })
}

/// Subtracts the mean from a vector, projecting it onto the zero-sum hyperplane.
pub fn center_vector(v: &DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.map(|x| x - mean)
}

/// Symmetrizes a matrix as `(a + a^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = a.clone();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    s
}

/// Largest absolute deviation from symmetry, `max |a[i][j] - a[j][i]|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted ascending.
///
/// # Returns
/// `(values, vectors)` where `vectors.column(k)` is the unit eigenvector for
/// `values[k]`.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    (values, vectors)
}

/// Symmetric square-root factor `F` of a positive semidefinite matrix, with
/// `F * F^T ~= a`, built from the eigendecomposition.
///
/// Eigenvalues in `[-floor, 0)` are treated as rounding noise and clipped to
/// zero, where `floor = negativity_tol * trace`; anything more negative is an
/// error.
///
/// # Arguments
/// * `a` - symmetric positive semidefinite matrix.
/// * `negativity_tol` - relative tolerance for clipping small negative
///   eigenvalues (relative to the trace of `a`).
pub fn psd_sqrt_factor(a: &DMatrix<f64>, negativity_tol: f64) -> CoreResult<DMatrix<f64>> {
    let (values, vectors) = sorted_symmetric_eigen(a);
    let floor = negativity_tol * a.trace().abs().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    let mut scaled = vectors;
    for k in 0..n {
        let lambda = values[k];
        if lambda < -floor {
            return Err(CoreError::IndefiniteCovariance {
                eigenvalue: lambda,
                floor: -floor,
            });
        }
        let root = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, k)] *= root;
        }
    }
    Ok(scaled)
}

/// Inverse and determinant of a symmetric positive definite 2x2 matrix.
///
/// # Returns
/// `(inverse, determinant)`, or a degeneracy error when the determinant is
/// not safely positive relative to the matrix scale.
pub fn invert_spd2(
    a: &nalgebra::Matrix2<f64>,
) -> CoreResult<(nalgebra::Matrix2<f64>, f64)> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = a[(0, 0)].abs().max(a[(1, 1)].abs()).max(f64::MIN_POSITIVE);
    if det <= scale * scale * 1e-14 || a[(0, 0)] <= 0.0 {
        return Err(CoreError::DegenerateCovariance {
            detail: format!("2x2 covariance is numerically singular (det = {det:e})"),
        });
    }
    let inv = nalgebra::Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
    Ok((inv, det))
}
