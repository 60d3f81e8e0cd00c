//! Least-squares linear and polynomial regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Relative singular-value cutoff for the minimal-norm fallback.
const LSTSQ_CUTOFF: f64 = 1e-12;

/// `y = intercept + sum_j weights[j] * x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }

    /// `(intercept, weights...)`.
    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(self.intercept).chain(self.weights.iter().copied()).collect()
    }
}

fn check_shape(features: &[Vec<f64>], target: &[f64]) -> Result<usize> {
    if features.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != target.len() {
        return Err(Error::LengthMismatch { expected: features.len(), got: target.len() });
    }
    let f = features[0].len();
    if features.iter().any(|r| r.len() != f) {
        return Err(Error::ShapeMismatch("ragged feature rows".into()));
    }
    Ok(f)
}

/// Ordinary least squares with an intercept. Rank-deficient designs (fewer
/// rows than coefficients, duplicated columns) get the minimal-norm solution.
pub fn fit_linear(features: &[Vec<f64>], target: &[f64]) -> Result<LinearModel> {
    let f = check_shape(features, target)?;
    let n = features.len();
    let x = DMatrix::from_fn(n, f + 1, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
    let y = DVector::from_column_slice(target);
    let beta = lstsq(&x, &y, LSTSQ_CUTOFF);
    Ok(LinearModel { intercept: beta[0], weights: beta.iter().skip(1).copied().collect() })
}

/// Polynomial basis expansion followed by [`fit_linear`].
///
/// Without cross terms each feature contributes `x, x^2, .., x^degree`.
/// With cross terms every monomial of total degree `1..=degree` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub degree: usize,
    pub cross_terms: bool,
    pub n_features: usize,
    pub linear: LinearModel,
}

impl PolynomialModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.linear.predict(&expand(row, self.degree, self.cross_terms))
    }
}

/// Exponent vectors of all monomials with total degree in `1..=degree`.
fn monomials(n_features: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n_features, degree, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn expand(row: &[f64], degree: usize, cross_terms: bool) -> Vec<f64> {
    if cross_terms {
        monomials(row.len(), degree)
            .into_iter()
            .map(|m| m.iter().map(|&j| row[j]).product())
            .collect()
    } else {
        row.iter()
            .flat_map(|&x| (1..=degree).scan(1.0, move |acc, _| {
                *acc *= x;
                Some(*acc)
            }))
            .collect()
    }
}

pub fn fit_polynomial(
    features: &[Vec<f64>],
    target: &[f64],
    degree: usize,
    cross_terms: bool,
) -> Result<PolynomialModel> {
    if degree == 0 {
        return Err(Error::invalid("degree", "must be at least 1"));
    }
    let f = check_shape(features, target)?;
    let expanded: Vec<Vec<f64>> = features.iter().map(|r| expand(r, degree, cross_terms)).collect();
    Ok(PolynomialModel { degree, cross_terms, n_features: f, linear: fit_linear(&expanded, target)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn col(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn exact_affine_fit() {
        let m = fit_linear(&col(&[0.0, 1.0, 2.0]), &[1.0, 3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(m.intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.weights[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.predict(&[10.0]), 21.0, epsilon = 1e-10);
        let m = LinearModel { intercept: 1.0, weights: vec![2.0] };
        assert_eq!(m.predict(&[10.0]), 21.0);
    }

    #[test]
    fn duplicate_columns_take_minimal_norm() {
        let x: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v, v]).collect();
        let y = [1.0, 3.0, 5.0, 7.0];
        let m = fit_linear(&x, &y).unwrap();
        // any split w1 + w2 = 2 fits; the minimal-norm one is symmetric
        assert_abs_diff_eq!(m.weights[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.weights[1], 1.0, epsilon = 1e-9);
        let single = fit_linear(&col(&[0.0, 1.0, 2.0, 3.0]), &y).unwrap();
        for v in [-3.0, 0.5, 10.0] {
            assert_abs_diff_eq!(m.predict(&[v, v]), single.predict(&[v]), epsilon = 1e-9);
        }
    }

    #[test]
    fn underdetermined_fit_is_finite() {
        let m = fit_linear(&[vec![1.0, 2.0, 3.0]], &[4.0]).unwrap();
        assert_abs_diff_eq!(m.predict(&[1.0, 2.0, 3.0]), 4.0, epsilon = 1e-9);
        assert!(matches!(fit_linear(&[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn quadratic_recovery() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m = fit_polynomial(&col(&xs), &ys, 2, false).unwrap();
        let c = m.linear.coefficients();
        for (got, want) in c.iter().zip([0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn degree_one_equals_linear() {
        let x = vec![vec![0.5, 2.0], vec![1.0, -1.0], vec![3.0, 0.0], vec![2.0, 2.5]];
        let y = [1.0, -2.0, 4.0, 0.5];
        let p = fit_polynomial(&x, &y, 1, false).unwrap();
        let l = fit_linear(&x, &y).unwrap();
        assert_eq!(p.linear, l);
        assert!(fit_polynomial(&x, &y, 0, false).is_err());
    }

    #[test]
    fn constant_targets_give_intercept_only() {
        let m = fit_polynomial(&col(&[-70.0, -65.0, -60.0, -55.0, -50.0]), &[250.0; 5], 3, false).unwrap();
        assert_abs_diff_eq!(m.linear.intercept, 250.0, epsilon = 1e-6);
        for w in &m.linear.weights {
            assert_abs_diff_eq!(*w, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn expansion_layouts() {
        assert_eq!(expand(&[2.0, 3.0], 3, false), vec![2.0, 4.0, 8.0, 3.0, 9.0, 27.0]);
        // x, x^2, xy, y, y^2
        assert_eq!(expand(&[2.0, 3.0], 2, true), vec![2.0, 4.0, 6.0, 3.0, 9.0]);
        assert_eq!(monomials(3, 4).len(), 34);
    }

    #[test]
    fn rssi_scale_quartic_fits_exactly() {
        // quartic in RSSI-like magnitudes stresses conditioning
        let xs: Vec<f64> = (0..30).map(|i| -90.0 + 2.0 * i as f64).collect();
        let f = |x: f64| 3.0 + 0.5 * x - 0.01 * x * x + 1e-4 * x.powi(3) + 2e-6 * x.powi(4);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let m = fit_polynomial(&col(&xs), &ys, 4, false).unwrap();
        for &x in &xs {
            assert_abs_diff_eq!(m.predict(&[x]), f(x), epsilon = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn residuals_are_orthogonal_to_design(
            rows in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -50.0..50.0f64), 5..40)
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let m = fit_linear(&x, &y).unwrap();
            let res: Vec<f64> = x.iter().zip(&y).map(|(r, t)| t - m.predict(r)).collect();
            let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max) * 10.0 * rows.len() as f64;
            prop_assert!(res.iter().sum::<f64>().abs() < 1e-8 * scale);
            for j in 0..2 {
                let dot: f64 = res.iter().zip(&x).map(|(r, row)| r * row[j]).sum();
                prop_assert!(dot.abs() < 1e-8 * scale);
            }
        }
    }
}
