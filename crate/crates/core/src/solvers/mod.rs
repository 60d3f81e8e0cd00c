//! Closed-form position estimators.
//!
//! [`SolverKind`] gives every estimator a common entry point so callers can
//! select one by name (`trilateration`, `lls`, `wls`, `wls-bc`, `hyperbolic`,
//! `hyperbolic-w`).

pub mod hyperbolic;
pub mod pseudo_linear;
pub mod trilateration;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hyperbolic::hyperbolic_solve;
pub use pseudo_linear::{
    bias_compensated_or_wls, bias_compensated_solve, bias_terms, build_weights, linearize,
    lls_solve, wls_solve, BiasTerms, Fallback, LinearSystem, Solution, WeightModel,
};
pub use trilateration::{trilaterate, trilaterate_2d};

use crate::error::{Error, Result};
use crate::model::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    Trilateration,
    Lls,
    Wls,
    WlsBc,
    Hyperbolic,
    HyperbolicW,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Trilateration,
        SolverKind::Lls,
        SolverKind::Wls,
        SolverKind::WlsBc,
        SolverKind::Hyperbolic,
        SolverKind::HyperbolicW,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Trilateration => "trilateration",
            SolverKind::Lls => "lls",
            SolverKind::Wls => "wls",
            SolverKind::WlsBc => "wls-bc",
            SolverKind::Hyperbolic => "hyperbolic",
            SolverKind::HyperbolicW => "hyperbolic-w",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("solver", format!("unknown solver `{s}`")))
    }
}

/// Per-anchor noise levels the weighted estimators assume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Anchor coordinate noise std per anchor (cm).
    pub sigmas_a: Vec<f64>,
    /// Shadowing std per anchor (dB).
    pub sigmas_p: Vec<f64>,
    pub eta: f64,
    /// Subtract the design/RHS cross term in `wls-bc`.
    pub include_cross_term: bool,
}

impl NoiseModel {
    pub fn uniform(m: usize, sigma_a: f64, sigma_p: f64, eta: f64) -> Self {
        Self {
            sigmas_a: vec![sigma_a; m],
            sigmas_p: vec![sigma_p; m],
            eta,
            include_cross_term: false,
        }
    }

    /// Keeps only the entries for `indices` (anchors still in range).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            sigmas_a: indices.iter().map(|&i| self.sigmas_a[i]).collect(),
            sigmas_p: indices.iter().map(|&i| self.sigmas_p[i]).collect(),
            ..self.clone()
        }
    }
}

impl SolverKind {
    /// Estimates a planar position from anchor coordinates and ranges.
    pub fn solve(&self, anchors: &[Position], distances: &[f64], noise: &NoiseModel) -> Result<Solution> {
        let m = anchors.len();
        if noise.sigmas_a.len() != m || noise.sigmas_p.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: noise.sigmas_a.len().min(noise.sigmas_p.len()) });
        }
        let plain = |p: Position| Solution { position: p, fallback: None };
        match self {
            SolverKind::Trilateration => trilaterate_2d(anchors, distances).map(plain),
            SolverKind::Lls => lls_solve(&linearize(anchors, distances)?).map(plain),
            SolverKind::Wls => {
                let sys = linearize(anchors, distances)?;
                let w = build_weights(anchors, distances, &noise.sigmas_a, &noise.sigmas_p, noise.eta)?;
                wls_solve(&sys, &w)
            }
            SolverKind::WlsBc => {
                let sys = linearize(anchors, distances)?;
                let w = build_weights(anchors, distances, &noise.sigmas_a, &noise.sigmas_p, noise.eta)?;
                let bias = bias_terms(anchors, distances, &noise.sigmas_a, &noise.sigmas_p, noise.eta, &w)?;
                bias_compensated_or_wls(&sys, &w, &bias, noise.include_cross_term)
            }
            SolverKind::Hyperbolic | SolverKind::HyperbolicW => {
                // the hyperbolic covariance takes one shadowing level
                let sigma = noise.sigmas_p.iter().sum::<f64>() / m.max(1) as f64;
                hyperbolic_solve(anchors, distances, sigma, noise.eta, *self == SolverKind::HyperbolicW)
                    .map(plain)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
        assert!("gauss-newton".parse::<SolverKind>().is_err());
    }
}
