//! Small dense linear-algebra helpers shared by the solvers and learners.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Moore-Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `rel_cutoff * max|eigenvalue|`. Returns `None` when the matrix is
/// numerically zero.
pub(crate) fn symmetric_pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if !(max > f64::MIN_POSITIVE) {
        return None;
    }
    let cut = rel_cutoff * max;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cut {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lambda;
        }
    }
    Some(out)
}

/// Minimal-norm least-squares solution of `x * beta ~= y` via SVD with a
/// relative singular-value cutoff. Columns are scaled to unit norm first,
/// which keeps badly scaled polynomial designs well conditioned.
pub(crate) fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    let cols = x.ncols();
    let scale: Vec<f64> = (0..cols)
        .map(|j| {
            let n = x.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = (rel_cutoff * smax).max(f64::MIN_POSITIVE);
    let beta = svd
        .solve(y, eps)
        .unwrap_or_else(|_| DVector::zeros(cols));
    DVector::from_iterator(cols, beta.iter().zip(&scale).map(|(b, s)| b / s))
}

/// Centering projector `I - (1/M) 1 1^T`.
pub(crate) fn centering(m: usize) -> DMatrix<f64> {
    DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64)
}

/// Ratio of the smallest to the largest singular value of a tall `M x 2` matrix.
pub(crate) fn condition_ratio(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

pub(crate) fn solve2(m: &Matrix2<f64>, rhs: &Vector2<f64>) -> Option<Vector2<f64>> {
    m.try_inverse().map(|inv| inv * rhs)
}
