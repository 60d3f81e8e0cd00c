//! Supervised learners used for fingerprint-style localization.
//!
//! Regression learners predict one coordinate; a [`PositionModel`] pairs two
//! independently fitted models for `(x, y)`.

pub mod format;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Position;

pub use forest::{fit_forest, Forest, ForestParams};
pub use knn::{knn_classify, tune_k, KnnModel};
pub use linear::{fit_linear, fit_polynomial, LinearModel, PolynomialModel};
pub use format::{load_model, save_model, ModelFile, ModelRecord};
pub use mlp::{mlp_forward, mlp_train, Activation, MlpModel, Standardizer, TrainParams, TrainTrace};
pub use tree::{fit_tree, DecisionTree, SplitMode, TreeParams};

/// RSSI feature rows with `(x, y)` ground truth in centimeters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionDataset {
    /// `N x F` feature matrix, one row per sample.
    pub features: Vec<Vec<f64>>,
    /// `(x, y)` per sample.
    pub targets: Vec<[f64; 2]>,
}

impl RegressionDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<[f64; 2]>) -> Result<Self> {
        let ds = Self { features, targets };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.features.len() != self.targets.len() {
            return Err(Error::LengthMismatch { expected: self.features.len(), got: self.targets.len() });
        }
        let f = self.features[0].len();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != f {
                return Err(Error::ShapeMismatch(format!("row {i} has {} features, expected {f}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) || self.targets[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("row {i} has a non-finite value")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// One coordinate of the targets (0 = x, 1 = y).
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.targets.iter().map(|t| t[axis]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Contiguous split: the last `round(test_fraction * N)` rows are held out.
    pub fn split_tail(&self, test_fraction: f64) -> Result<(Self, Self)> {
        let (train, test) = split_indices(self.len(), test_fraction)?;
        Ok((self.subset(&train), self.subset(&test)))
    }
}

pub(crate) fn split_indices(n: usize, test_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid("test_size", format!("must be in [0, 1), got {test_fraction}")));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test >= n {
        return Err(Error::TooFewSamples { need: n_test + 1, got: n });
    }
    Ok(((0..n - n_test).collect(), (n - n_test..n).collect()))
}

/// Zone label of the iBeacon classification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
    D,
}

impl Zone {
    pub const ALL: [Zone; 4] = [Zone::A, Zone::B, Zone::C, Zone::D];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Zone> {
        Zone::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [u8; 4] {
        let mut v = [0; 4];
        v[self.index()] = 1;
        v
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = ['A', 'B', 'C', 'D'][self.index()];
        write!(f, "{c}")
    }
}

impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Zone::A),
            "B" | "b" => Ok(Zone::B),
            "C" | "c" => Ok(Zone::C),
            "D" | "d" => Ok(Zone::D),
            other => Err(Error::invalid("zone", format!("unknown zone `{other}`"))),
        }
    }
}

/// Labeled iBeacon rows. Out-of-range beacons keep the raw `-200` reading.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationDataset {
    /// Original location label of each row.
    pub locations: Vec<String>,
    /// `N x 13` RSSI matrix.
    pub features: Vec<Vec<f64>>,
    pub zones: Vec<Zone>,
}

impl ClassificationDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn one_hot(&self) -> Vec<[u8; 4]> {
        self.zones.iter().map(|z| z.one_hot()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            locations: indices.iter().map(|&i| self.locations[i].clone()).collect(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            zones: indices.iter().map(|&i| self.zones[i]).collect(),
        }
    }

    /// Seeded random split; `test_fraction` of the rows go to the second set.
    pub fn shuffled_split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut crate::rng::seeded(seed));
        let (train, test) = split_indices(self.len(), test_fraction)?;
        let pick = |ix: Vec<usize>| ix.into_iter().map(|i| order[i]).collect::<Vec<_>>();
        Ok((self.subset(&pick(train)), self.subset(&pick(test))))
    }
}

/// Which regression learner to fit, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum LearnerSpec {
    Linear,
    Polynomial { degree: usize, cross_terms: bool },
    Tree(TreeParams),
    ExtraTrees(ForestParams),
    RandomForest(ForestParams),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Linear => "linear",
            LearnerSpec::Polynomial { .. } => "poly",
            LearnerSpec::Tree(_) => "tree",
            LearnerSpec::ExtraTrees(_) => "extra-trees",
            LearnerSpec::RandomForest(_) => "forest",
        }
    }
}

/// A fitted single-output regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Linear(LinearModel),
    Polynomial(PolynomialModel),
    Tree(DecisionTree),
    Forest(Forest),
}

impl Regressor {
    pub fn fit(spec: &LearnerSpec, features: &[Vec<f64>], target: &[f64], seed: u64) -> Result<Self> {
        Ok(match *spec {
            LearnerSpec::Linear => Regressor::Linear(fit_linear(features, target)?),
            LearnerSpec::Polynomial { degree, cross_terms } => {
                Regressor::Polynomial(fit_polynomial(features, target, degree, cross_terms)?)
            }
            LearnerSpec::Tree(p) => Regressor::Tree(fit_tree(features, target, &p, seed)?),
            LearnerSpec::ExtraTrees(p) => Regressor::Forest(fit_forest(
                features,
                target,
                &ForestParams { bootstrap: false, split_mode: SplitMode::Random, ..p },
                seed,
            )?),
            LearnerSpec::RandomForest(p) => Regressor::Forest(fit_forest(
                features,
                target,
                &ForestParams { bootstrap: true, split_mode: SplitMode::Exhaustive, ..p },
                seed,
            )?),
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Linear(m) => m.predict(row),
            Regressor::Polynomial(m) => m.predict(row),
            Regressor::Tree(m) => m.predict(row),
            Regressor::Forest(m) => m.predict(row),
        }
    }
}

/// Seed offset separating the `y` model's random streams from the `x` model's.
pub(crate) const Y_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Two independent regressors, one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionModel {
    pub spec: LearnerSpec,
    pub seed: u64,
    pub n_features: usize,
    pub x: Regressor,
    pub y: Regressor,
}

impl PositionModel {
    pub fn fit(spec: &LearnerSpec, ds: &RegressionDataset, seed: u64) -> Result<Self> {
        ds.validate()?;
        Ok(Self {
            spec: *spec,
            seed,
            n_features: ds.n_features(),
            x: Regressor::fit(spec, &ds.features, &ds.coordinate(0), seed)?,
            y: Regressor::fit(spec, &ds.features, &ds.coordinate(1), seed.wrapping_add(Y_SEED_OFFSET))?,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Position {
        Position::new(self.x.predict(row), self.y.predict(row))
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<Position> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn check_features(&self, n: usize) -> Result<()> {
        if n != self.n_features {
            return Err(Error::ShapeMismatch(format!("model expects {} features, got {n}", self.n_features)));
        }
        Ok(())
    }
}
