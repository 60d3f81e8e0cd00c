//! Pseudo-linear position estimation from circle intersections.
//!
//! Subtracting the mean circle equation from each `(x - x_i)^2 + (y - y_i)^2 = d_i^2`
//! gives the centered linear system `2 A s = b~` with
//!
//! ```text
//! A_i  = (x_i - x_c, y_i - y_c)
//! b~_i = d_c - d_i^2 + k_i - k_c,   k_i = x_i^2 + y_i^2,   d_c = mean(d_i^2)
//! ```
//!
//! On top of plain least squares this module provides the covariance-weighted
//! solution and its bias-compensated variant for noisy anchor coordinates and
//! log-normal distance errors.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{centering, condition_ratio, solve2, symmetric_pinv};
use crate::model::Position;
use crate::radio::squared_distance_log_scale;

/// Relative eigenvalue cutoff used when pseudo-inverting the weight matrix.
pub const WEIGHT_PINV_CUTOFF: f64 = 1e-10;

/// Smallest accepted `sigma_min / sigma_max` ratio of the design matrix.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub x_c: f64,
    pub y_c: f64,
    /// Mean of the squared distances.
    pub d_c: f64,
    /// Mean of `k_i = x_i^2 + y_i^2`.
    pub k_c: f64,
}

/// The centered system `2 A s = b~`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    /// `M x 2` design matrix (cm). Columns sum to zero.
    pub design: DMatrix<f64>,
    /// Right-hand side (cm^2).
    pub rhs: DVector<f64>,
    pub centroids: Centroids,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }
}

/// Where a solution came from, when it is not the requested estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// The weight matrix was numerically zero; plain least squares was used.
    DegenerateWeights,
    /// The bias-corrected information matrix was not positive definite; the
    /// uncorrected weighted solution was used.
    BiasNotPositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub position: Position,
    pub fallback: Option<Fallback>,
}

impl Solution {
    fn exact(position: Position) -> Self {
        Self { position, fallback: None }
    }
}

pub fn linearize(anchors: &[Position], distances: &[f64]) -> Result<LinearSystem> {
    let m = anchors.len();
    if m < 3 {
        return Err(Error::TooFewAnchors { need: 3, got: m });
    }
    if distances.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: distances.len() });
    }
    let mf = m as f64;
    let k: Vec<f64> = anchors.iter().map(|a| a.x * a.x + a.y * a.y).collect();
    let d2: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let centroids = Centroids {
        x_c: anchors.iter().map(|a| a.x).sum::<f64>() / mf,
        y_c: anchors.iter().map(|a| a.y).sum::<f64>() / mf,
        d_c: d2.iter().sum::<f64>() / mf,
        k_c: k.iter().sum::<f64>() / mf,
    };
    let design = DMatrix::from_fn(m, 2, |i, j| match j {
        0 => anchors[i].x - centroids.x_c,
        _ => anchors[i].y - centroids.y_c,
    });
    let rhs = DVector::from_fn(m, |i, _| centroids.d_c - d2[i] + k[i] - centroids.k_c);
    Ok(LinearSystem { design, rhs, centroids })
}

/// Solves `(A^T W+ A - L) s = 1/2 (A^T W+ (b~ - t) - g)`; `winv = None` means
/// unit weights. Every estimator in this module funnels through here so that
/// zero corrections reproduce the uncorrected answer bit for bit.
fn normal_solve(
    sys: &LinearSystem,
    winv: Option<&DMatrix<f64>>,
    l: &Matrix2<f64>,
    t: Option<&DVector<f64>>,
    g: &Vector2<f64>,
    check_pd: bool,
) -> Result<Position> {
    if condition_ratio(&sys.design) < RANK_TOL {
        return Err(Error::RankDeficient);
    }
    let a = &sys.design;
    let b = match t {
        Some(t) => &sys.rhs - t,
        None => sys.rhs.clone(),
    };
    let (ata, atb) = match winv {
        Some(wi) => {
            let atw = a.transpose() * wi;
            (&atw * a, &atw * b)
        }
        None => (a.transpose() * a, a.transpose() * b),
    };
    let ata = Matrix2::new(ata[(0, 0)], ata[(0, 1)], ata[(1, 0)], ata[(1, 1)]);
    let info = ata - l;
    if check_pd {
        let sym = (info + info.transpose()) * 0.5;
        if !(sym.determinant() > 0.0 && sym.trace() > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
    }
    let rhs = Vector2::new(atb[0], atb[1]) - g;
    let s = solve2(&info, &rhs).ok_or(Error::RankDeficient)? * 0.5;
    if !(s[0].is_finite() && s[1].is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(Position::new(s[0], s[1]))
}

/// Ordinary least squares: `s = 1/2 (A^T A)^-1 A^T b~`.
pub fn lls_solve(sys: &LinearSystem) -> Result<Position> {
    normal_solve(sys, None, &Matrix2::zeros(), None, &Vector2::zeros(), false)
}

/// Covariance of `b~` used as the WLS weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    /// Symmetric PSD `M x M` matrix.
    pub w: DMatrix<f64>,
    /// Relative eigenvalue cutoff for the pseudo-inverse.
    pub regularization: f64,
}

impl WeightModel {
    pub fn new(w: DMatrix<f64>) -> Self {
        Self { w, regularization: WEIGHT_PINV_CUTOFF }
    }

    /// Pseudo-inverse of `w`, or `None` when `w` is numerically zero.
    pub fn pseudo_inverse(&self) -> Option<DMatrix<f64>> {
        symmetric_pinv(&self.w, self.regularization)
    }
}

/// `Var(d_i^2)` for a log-normal distance estimate with shadowing `sigma_p` dB.
pub fn squared_distance_variance(d: f64, sigma_p: f64, eta: f64) -> f64 {
    let s = std::f64::consts::LN_10 / (10.0 * eta) * sigma_p;
    let s2 = s * s;
    (4.0 * d.ln()).exp() * ((8.0 * s2).exp() - (4.0 * s2).exp())
}

/// `W = P diag(Var(k_i) + Var(d_i^2)) P` with `P = I - 11^T / M`.
///
/// `Var(k_i) = 4 sa^2 (sa^2 + x_i^2 + y_i^2)` for Gaussian coordinate noise.
/// Noisy coordinates and distances stand in for the unknown true values.
pub fn build_weights(
    anchors: &[Position],
    distances: &[f64],
    sigmas_a: &[f64],
    sigmas_p: &[f64],
    eta: f64,
) -> Result<WeightModel> {
    let m = anchors.len();
    for len in [distances.len(), sigmas_a.len(), sigmas_p.len()] {
        if len != m {
            return Err(Error::LengthMismatch { expected: m, got: len });
        }
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    if let Some(&d) = distances.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::NonPositiveDistance(d));
    }
    let cov = DVector::from_fn(m, |i, _| {
        let a = anchors[i];
        let sa2 = sigmas_a[i] * sigmas_a[i];
        let var_k = 4.0 * sa2 * (sa2 + a.x * a.x + a.y * a.y);
        var_k + squared_distance_variance(distances[i], sigmas_p[i], eta)
    });
    let p = centering(m);
    let w = &p * DMatrix::from_diagonal(&cov) * &p;
    Ok(WeightModel::new((&w + w.transpose()) * 0.5))
}

/// Weighted least squares `s = 1/2 (A^T W+ A)^-1 A^T W+ b~`.
///
/// `W` has the null vector `1` by construction, so its Moore-Penrose
/// pseudo-inverse is used. A numerically zero `W` falls back to [`lls_solve`].
pub fn wls_solve(sys: &LinearSystem, w: &WeightModel) -> Result<Solution> {
    check_weight_shape(sys, w)?;
    match w.pseudo_inverse() {
        Some(winv) => normal_solve(sys, Some(&winv), &Matrix2::zeros(), None, &Vector2::zeros(), false)
            .map(Solution::exact),
        None => Ok(Solution {
            position: lls_solve(sys)?,
            fallback: Some(Fallback::DegenerateWeights),
        }),
    }
}

fn check_weight_shape(sys: &LinearSystem, w: &WeightModel) -> Result<()> {
    if w.w.nrows() != sys.len() || w.w.ncols() != sys.len() {
        return Err(Error::ShapeMismatch(format!(
            "weight matrix is {}x{}, system has {} rows",
            w.w.nrows(),
            w.w.ncols(),
            sys.len()
        )));
    }
    Ok(())
}

/// Expected bias contributions of noisy anchors and log-normal distances.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTerms {
    /// `E[N^T W+ N]`, the design-noise bias of the information matrix.
    pub l: Matrix2<f64>,
    /// `E[b~] - b`, the non-zero-mean part of the right-hand side.
    pub t: DVector<f64>,
    /// `E[N^T W+ b~]`, the correlation between design and RHS noise.
    pub g: Vector2<f64>,
    /// `ln 10 / (5 sqrt(2) eta)`.
    pub u: f64,
}

impl BiasTerms {
    pub fn zeros(m: usize, eta: f64) -> Self {
        Self {
            l: Matrix2::zeros(),
            t: DVector::zeros(m),
            g: Vector2::zeros(),
            u: squared_distance_log_scale(eta),
        }
    }
}

/// Computes [`BiasTerms`] for the given noise levels and weight matrix.
///
/// With `N = P N1` (the centroid noise row is `1/M 11^T N1`) and
/// `Q = P W+ P`, the expectations reduce to
///
/// ```text
/// L = diag(sum_i Q_ii sa_i^2, sum_i Q_ii sa_i^2)
/// g = (2 sum_i Q_ii x_i sa_i^2, 2 sum_i Q_ii y_i sa_i^2)
/// t_i = -c_i d_i^2 + mean_j(c_j d_j^2) + 2 (sa_i^2 - mean_j sa_j^2)
/// c_i = u^2 sp_i^2 + u^4 sp_i^4 / 2
/// ```
///
/// where `c_i` is the second-order expansion of `exp(u^2 sp_i^2) - 1`, the
/// relative inflation of `E[d_i^2]`. A numerically zero `W` uses `Q = P`.
pub fn bias_terms(
    anchors: &[Position],
    distances: &[f64],
    sigmas_a: &[f64],
    sigmas_p: &[f64],
    eta: f64,
    w: &WeightModel,
) -> Result<BiasTerms> {
    let m = anchors.len();
    for len in [distances.len(), sigmas_a.len(), sigmas_p.len(), w.w.nrows()] {
        if len != m {
            return Err(Error::LengthMismatch { expected: m, got: len });
        }
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    let p = centering(m);
    let q = match w.pseudo_inverse() {
        Some(winv) => &p * winv * &p,
        None => p,
    };
    let mf = m as f64;
    let u = squared_distance_log_scale(eta);

    let (mut lxx, mut gx, mut gy) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let s2 = sigmas_a[i] * sigmas_a[i];
        lxx += q[(i, i)] * s2;
        gx += 2.0 * q[(i, i)] * anchors[i].x * s2;
        gy += 2.0 * q[(i, i)] * anchors[i].y * s2;
    }

    let c: Vec<f64> = sigmas_p
        .iter()
        .map(|sp| {
            let a = u * u * sp * sp;
            a + a * a / 2.0
        })
        .collect();
    let cd: Vec<f64> = c.iter().zip(distances).map(|(c, d)| c * d * d).collect();
    let mean_cd = cd.iter().sum::<f64>() / mf;
    let mean_sa2 = sigmas_a.iter().map(|s| s * s).sum::<f64>() / mf;
    let t = DVector::from_fn(m, |i, _| {
        -cd[i] + mean_cd + 2.0 * (sigmas_a[i] * sigmas_a[i] - mean_sa2)
    });

    Ok(BiasTerms { l: Matrix2::new(lxx, 0.0, 0.0, lxx), t, g: Vector2::new(gx, gy), u })
}

/// Bias-compensated WLS:
/// `s = 1/2 (A^T W+ A - L)^-1 (A^T W+ (b~ - t) - g)`, with the `g` term only
/// when `include_cross_term` is set.
///
/// Returns [`Error::NotPositiveDefinite`] when the correction removes more
/// information than the data carries; callers usually fall back to
/// [`wls_solve`] (see [`bias_compensated_or_wls`]).
pub fn bias_compensated_solve(
    sys: &LinearSystem,
    w: &WeightModel,
    bias: &BiasTerms,
    include_cross_term: bool,
) -> Result<Solution> {
    check_weight_shape(sys, w)?;
    if bias.t.len() != sys.len() {
        return Err(Error::LengthMismatch { expected: sys.len(), got: bias.t.len() });
    }
    let g = if include_cross_term { bias.g } else { Vector2::zeros() };
    let winv = w.pseudo_inverse();
    let position = normal_solve(sys, winv.as_ref(), &bias.l, Some(&bias.t), &g, true)?;
    Ok(Solution {
        position,
        fallback: winv.is_none().then_some(Fallback::DegenerateWeights),
    })
}

/// [`bias_compensated_solve`], degrading to [`wls_solve`] when the corrected
/// information matrix is not positive definite.
pub fn bias_compensated_or_wls(
    sys: &LinearSystem,
    w: &WeightModel,
    bias: &BiasTerms,
    include_cross_term: bool,
) -> Result<Solution> {
    match bias_compensated_solve(sys, w, bias, include_cross_term) {
        Err(Error::NotPositiveDefinite) => {
            let s = wls_solve(sys, w)?;
            Ok(Solution { fallback: Some(Fallback::BiasNotPositiveDefinite), ..s })
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn anchors() -> Vec<Position> {
        vec![Position::new(0.0, 0.0), Position::new(4.0, 0.0), Position::new(0.0, 3.0)]
    }

    fn exact() -> Vec<f64> {
        vec![2f64.sqrt(), 10f64.sqrt(), 5f64.sqrt()]
    }

    #[test]
    fn linearize_worked_example() {
        let sys = linearize(&anchors(), &exact()).unwrap();
        let expect_a = [[-4.0 / 3.0, -1.0], [8.0 / 3.0, -1.0], [-4.0 / 3.0, 2.0]];
        let expect_b = [-14.0 / 3.0, 10.0 / 3.0, 4.0 / 3.0];
        for i in 0..3 {
            assert_abs_diff_eq!(sys.design[(i, 0)], expect_a[i][0], epsilon = 1e-12);
            assert_abs_diff_eq!(sys.design[(i, 1)], expect_a[i][1], epsilon = 1e-12);
            assert_abs_diff_eq!(sys.rhs[i], expect_b[i], epsilon = 1e-12);
            // 2 A (1, 1)^T = b~
            let lhs = 2.0 * (sys.design[(i, 0)] + sys.design[(i, 1)]);
            assert_abs_diff_eq!(lhs, sys.rhs[i], epsilon = 1e-12);
        }
        for j in 0..2 {
            assert_abs_diff_eq!(sys.design.column(j).sum(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn design_matrix_is_translation_invariant() {
        let target = Position::new(1.0, 1.0);
        let moved: Vec<Position> = anchors().iter().map(|a| a.translate(37.0, -12.5)).collect();
        let t2 = target.translate(37.0, -12.5);
        let d: Vec<f64> = moved.iter().map(|a| a.distance(&t2)).collect();
        let a = linearize(&anchors(), &exact()).unwrap();
        let b = linearize(&moved, &d).unwrap();
        assert!((a.design - b.design).abs().max() < 1e-12);
    }

    #[test]
    fn too_few_anchors() {
        let err = linearize(&anchors()[..2], &exact()[..2]).unwrap_err();
        assert!(matches!(err, Error::TooFewAnchors { got: 2, .. }));
    }

    #[test]
    fn lls_recovers_worked_example() {
        let p = lls_solve(&linearize(&anchors(), &exact()).unwrap()).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lls_collinear_is_rank_deficient() {
        let line = [Position::new(0.0, 0.0), Position::new(1.0, 0.0), Position::new(2.0, 0.0)];
        let sys = linearize(&line, &[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(lls_solve(&sys), Err(Error::RankDeficient)));
    }

    #[test]
    fn zero_noise_weights_are_zero_and_fall_back() {
        let w = build_weights(&anchors(), &exact(), &[0.0; 3], &[0.0; 3], 2.0).unwrap();
        assert_eq!(w.w.abs().max(), 0.0);
        let sys = linearize(&anchors(), &exact()).unwrap();
        let s = wls_solve(&sys, &w).unwrap();
        assert_eq!(s.fallback, Some(Fallback::DegenerateWeights));
        assert_eq!(s.position, lls_solve(&sys).unwrap());
    }

    #[test]
    fn equal_variances_give_scaled_projector() {
        // sa = 0 and equal distances make every Var(d_i^2) identical
        let d = [3.0, 3.0, 3.0];
        let w = build_weights(&anchors(), &d, &[0.0; 3], &[2.0; 3], 2.0).unwrap();
        let v = squared_distance_variance(3.0, 2.0, 2.0);
        let p = centering(3);
        assert!((&w.w - &p * v).abs().max() < 1e-12 * v);
        // P is idempotent
        assert!((&p * &p - &p).abs().max() < 1e-15);
    }

    #[test]
    fn weights_are_symmetric_with_zero_row_sums() {
        let w = build_weights(&anchors(), &[1.5, 2.5, 3.5], &[0.3, 0.1, 0.7], &[1.0, 2.0, 3.0], 2.5)
            .unwrap();
        assert!((&w.w - w.w.transpose()).abs().max() < 1e-12);
        for i in 0..3 {
            assert!(w.w.row(i).sum().abs() < 1e-9 * w.w.abs().max());
        }
        assert!(matches!(
            build_weights(&anchors(), &[0.0, 1.0, 1.0], &[0.0; 3], &[1.0; 3], 2.0),
            Err(Error::NonPositiveDistance(_))
        ));
    }

    #[test]
    fn identity_weights_match_lls() {
        let d = [1.6, 3.0, 2.1];
        let sys = linearize(&anchors(), &d).unwrap();
        let s = wls_solve(&sys, &WeightModel::new(DMatrix::identity(3, 3))).unwrap();
        let l = lls_solve(&sys).unwrap();
        assert_abs_diff_eq!(s.position.x, l.x, epsilon = 1e-12);
        assert_abs_diff_eq!(s.position.y, l.y, epsilon = 1e-12);
        assert_eq!(s.fallback, None);
    }

    #[test]
    fn weight_scale_cancels() {
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(400.0, 0.0),
            Position::new(0.0, 400.0),
            Position::new(400.0, 400.0),
        ];
        let d = [190.0, 300.0, 260.0, 350.0];
        let sys = linearize(&anchors, &d).unwrap();
        let p = centering(4);
        let base = wls_solve(&sys, &WeightModel::new(p.clone())).unwrap().position;
        for c in [1e-3, 2.0, 1e6] {
            let s = wls_solve(&sys, &WeightModel::new(&p * c)).unwrap().position;
            assert_abs_diff_eq!(s.x, base.x, epsilon = 1e-9);
            assert_abs_diff_eq!(s.y, base.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_bias_terms_reproduce_wls_exactly() {
        let d = [1.6, 3.0, 2.1];
        let sys = linearize(&anchors(), &d).unwrap();
        let w = build_weights(&anchors(), &d, &[0.1; 3], &[2.0; 3], 2.0).unwrap();
        let wls = wls_solve(&sys, &w).unwrap();
        for cross in [false, true] {
            let bc = bias_compensated_solve(&sys, &w, &BiasTerms::zeros(3, 2.0), cross).unwrap();
            assert_eq!(bc.position, wls.position);
        }
    }

    #[test]
    fn noiseless_bias_terms_vanish() {
        let w = build_weights(&anchors(), &exact(), &[0.0; 3], &[0.0; 3], 2.0).unwrap();
        let b = bias_terms(&anchors(), &exact(), &[0.0; 3], &[0.0; 3], 2.0, &w).unwrap();
        assert_eq!(b.l, Matrix2::zeros());
        assert_eq!(b.g, Vector2::zeros());
        assert!(b.t.iter().all(|&v| v == 0.0));
        let sys = linearize(&anchors(), &exact()).unwrap();
        let s = bias_compensated_solve(&sys, &w, &b, true).unwrap();
        assert_eq!(s.position, wls_solve(&sys, &w).unwrap().position);
    }

    #[test]
    fn homoscedastic_t_reduces_to_centered_squares() {
        let d = [1.6, 3.0, 2.1, 2.7];
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(4.0, 0.0),
            Position::new(0.0, 3.0),
            Position::new(4.0, 3.0),
        ];
        let sigma = 2.0;
        let w = build_weights(&anchors, &d, &[0.0; 4], &[sigma; 4], 2.0).unwrap();
        let b = bias_terms(&anchors, &d, &[0.0; 4], &[sigma; 4], 2.0, &w).unwrap();
        let u = squared_distance_log_scale(2.0);
        let c = u * u * sigma * sigma + u.powi(4) * sigma.powi(4) / 2.0;
        let d_c = d.iter().map(|v| v * v).sum::<f64>() / 4.0;
        for i in 0..4 {
            assert_abs_diff_eq!(b.t[i], c * (d_c - d[i] * d[i]), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(u, std::f64::consts::LN_10 / (10.0 * std::f64::consts::SQRT_2), epsilon = 1e-15);
    }

    /// Expands `E[N^T W+ N] = E[N1'WN1] + E[N2'WN2] - E[N2'WN1] - E[N1'WN2]`
    /// term by term from the definition `N2 = (1/M) 11^T N1` and checks it
    /// against the consolidated diagonal form.
    #[test]
    fn consolidated_l_matches_four_term_expansion() {
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(400.0, 0.0),
            Position::new(0.0, 400.0),
            Position::new(400.0, 400.0),
            Position::new(150.0, 220.0),
        ];
        let d = [180.0, 320.0, 240.0, 390.0, 60.0];
        let sa = 3.0;
        let w = build_weights(&anchors, &d, &[sa; 5], &[2.0; 5], 2.0).unwrap();
        let winv = w.pseudo_inverse().unwrap();
        let m = 5.0;
        let s2 = sa * sa;
        let sum_diag: f64 = (0..5).map(|i| winv[(i, i)]).sum();
        let total: f64 = winv.iter().sum();
        let col_sum = |i: usize| (0..5).map(|j| winv[(j, i)]).sum::<f64>();
        let row_sum = |i: usize| (0..5).map(|j| winv[(i, j)]).sum::<f64>();
        let n1n1 = s2 * sum_diag;
        // E[n_c^2] 1^T W+ 1 with Var(n_c) = sa^2 / M
        let n2n2 = s2 / m * total;
        let n2n1: f64 = (0..5).map(|i| s2 / m * col_sum(i)).sum();
        let n1n2: f64 = (0..5).map(|i| s2 / m * row_sum(i)).sum();
        let four_term = n1n1 + n2n2 - n2n1 - n1n2;
        let b = bias_terms(&anchors, &d, &[sa; 5], &[2.0; 5], 2.0, &w).unwrap();
        assert_abs_diff_eq!(b.l[(0, 0)], four_term, epsilon = 1e-12 * four_term.abs().max(1e-30));
        assert_abs_diff_eq!(b.l[(1, 1)], four_term, epsilon = 1e-12 * four_term.abs().max(1e-30));
        assert_eq!(b.l[(0, 1)], 0.0);
    }

    /// Monte-Carlo oracle for `L` and `g`: sample the anchor noise and average
    /// `N^T W+ N` and `N^T W+ b~` directly.
    #[test]
    fn bias_terms_match_monte_carlo() {
        use rand_distr::{Distribution, StandardNormal};
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(40.0, 0.0),
            Position::new(0.0, 40.0),
            Position::new(40.0, 40.0),
        ];
        let target = Position::new(15.0, 22.0);
        let d: Vec<f64> = anchors.iter().map(|a| a.distance(&target)).collect();
        let sa = [0.5, 1.0, 1.5, 0.8];
        let w = build_weights(&anchors, &d, &sa, &[0.0; 4], 2.0).unwrap();
        let winv = w.pseudo_inverse().unwrap();
        let b = bias_terms(&anchors, &d, &sa, &[0.0; 4], 2.0, &w).unwrap();

        let clean = linearize(&anchors, &d).unwrap();
        let mut rng = crate::rng::seeded(3);
        let n = 200_000;
        let (mut l_mc, mut g_mc) = (Matrix2::<f64>::zeros(), Vector2::<f64>::zeros());
        for _ in 0..n {
            let noisy: Vec<Position> = anchors
                .iter()
                .zip(&sa)
                .map(|(a, s)| {
                    let nx: f64 = StandardNormal.sample(&mut rng);
                    let ny: f64 = StandardNormal.sample(&mut rng);
                    Position::new(a.x + s * nx, a.y + s * ny)
                })
                .collect();
            let sys = linearize(&noisy, &d).unwrap();
            let nmat = &sys.design - &clean.design;
            let l = nmat.transpose() * &winv * &nmat;
            // E[N] = 0, so subtracting the clean rhs only removes variance
            let g = nmat.transpose() * &winv * (&sys.rhs - &clean.rhs);
            l_mc += Matrix2::new(l[(0, 0)], l[(0, 1)], l[(1, 0)], l[(1, 1)]);
            g_mc += Vector2::new(g[0], g[1]);
        }
        l_mc /= n as f64;
        g_mc /= n as f64;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(l_mc[(0, 0)], b.l[(0, 0)]) < 0.02, "{} vs {}", l_mc[(0, 0)], b.l[(0, 0)]);
        assert!(rel(l_mc[(1, 1)], b.l[(1, 1)]) < 0.02);
        assert!(rel(g_mc[0], b.g[0]) < 0.05, "{} vs {}", g_mc[0], b.g[0]);
        assert!(rel(g_mc[1], b.g[1]) < 0.05, "{} vs {}", g_mc[1], b.g[1]);
    }

    #[test]
    fn excessive_correction_is_not_positive_definite() {
        let d = [1.6, 3.0, 2.1];
        let sys = linearize(&anchors(), &d).unwrap();
        let w = WeightModel::new(centering(3));
        let mut b = BiasTerms::zeros(3, 2.0);
        b.l = Matrix2::identity() * 1e6;
        assert!(matches!(bias_compensated_solve(&sys, &w, &b, false), Err(Error::NotPositiveDefinite)));
        let s = bias_compensated_or_wls(&sys, &w, &b, false).unwrap();
        assert_eq!(s.fallback, Some(Fallback::BiasNotPositiveDefinite));
        assert_eq!(s.position, wls_solve(&sys, &w).unwrap().position);
    }
}
