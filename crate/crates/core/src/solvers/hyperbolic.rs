//! Weighted hyperbolic localization.
//!
//! With the frame shifted so that beacon 1 sits at the origin, differencing
//! squared ranges gives the linear model `M s = C`:
//!
//! ```text
//! M_n = (2 a_n, 2 b_n),   C_n = a_n^2 + b_n^2 - p_n^2 + p_1^2,   n = 2..N
//! ```
//!
//! The weighted variant uses the covariance of `C`,
//! `R = Var(p_1^2) 11^T + diag(Var(p_2^2), .., Var(p_N^2))`, where each
//! `Var(p_n^2) = p_n^4 (exp(8 s^2) - exp(4 s^2))`, `s = sigma ln10 / (10 eta)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::condition_ratio;
use crate::model::Position;
use crate::solvers::pseudo_linear::squared_distance_variance;

/// Below `VARIANCE_FLOOR * max` any range variance is treated as degenerate
/// and the covariance is replaced by the identity.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Covariance of the differenced measurement vector, or `None` when it is
/// degenerate and unit weights should be used.
pub fn range_covariance(distances: &[f64], sigma: f64, eta: f64) -> Option<DMatrix<f64>> {
    let var: Vec<f64> = distances.iter().map(|&p| squared_distance_variance(p, sigma, eta)).collect();
    let max = var.iter().cloned().fold(0.0_f64, f64::max);
    if !(max > 0.0) || var.iter().any(|v| !(*v >= VARIANCE_FLOOR * max)) {
        return None;
    }
    let n = distances.len() - 1;
    Some(DMatrix::from_fn(n, n, |r, c| var[0] + if r == c { var[r + 1] } else { 0.0 }))
}

pub fn hyperbolic_solve(
    anchors: &[Position],
    distances: &[f64],
    sigma: f64,
    eta: f64,
    weighted: bool,
) -> Result<Position> {
    let m = anchors.len();
    if m < 3 {
        return Err(Error::TooFewAnchors { need: 3, got: m });
    }
    if distances.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: distances.len() });
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    let origin = anchors[0];
    let p1 = distances[0] * distances[0];
    let design = DMatrix::from_fn(m - 1, 2, |r, c| {
        let a = anchors[r + 1];
        2.0 * if c == 0 { a.x - origin.x } else { a.y - origin.y }
    });
    let rhs = DVector::from_fn(m - 1, |r, _| {
        let (a, b) = (anchors[r + 1].x - origin.x, anchors[r + 1].y - origin.y);
        a * a + b * b - distances[r + 1] * distances[r + 1] + p1
    });
    if condition_ratio(&design) < 1e-10 {
        return Err(Error::RankDeficient);
    }
    let cov = if weighted { range_covariance(distances, sigma, eta) } else { None };
    let (normal, projected) = match cov {
        Some(r) => {
            let chol = r.cholesky().ok_or(Error::RankDeficient)?;
            let rinv_m = chol.solve(&design);
            let rinv_c = chol.solve(&rhs);
            (design.transpose() * rinv_m, design.transpose() * rinv_c)
        }
        None => (design.transpose() * &design, design.transpose() * &rhs),
    };
    let s = normal.lu().solve(&projected).ok_or(Error::RankDeficient)?;
    Ok(Position::new(s[0] + origin.x, s[1] + origin.y))
}
