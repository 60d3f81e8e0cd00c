//! TreeLoc: a stacked ensemble of extra trees, a decision tree and a random
//! forest, combined per coordinate by multiple linear regression.
//!
//! The three components are fitted on disjoint thirds of the data. Each then
//! predicts every row of the combiner set, and the combiner regresses the
//! true coordinate on `(1, etr, dtr, rfr)`.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_linear, ForestParams, LearnerSpec, PositionModel, RegressionDataset, TreeParams};
use crate::model::Position;
use crate::rng;

/// Published combiner for `x`: intercept, then ETR, DTR, RFR weights.
pub const PAPER_COMBINER_X: [f64; 4] = [-0.9494, 0.8036, 0.5476, 0.5212];
/// Published combiner for `y`.
pub const PAPER_COMBINER_Y: [f64; 4] = [-0.8348, 0.8922, 0.5937, 0.5292];

pub const MIN_SAMPLES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerMode {
    Fitted,
    FixedPaper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub etr: ForestParams,
    pub dtr: TreeParams,
    pub rfr: ForestParams,
}

impl Default for ComponentParams {
    fn default() -> Self {
        Self {
            etr: ForestParams::extra_trees(100, Some(25)),
            dtr: TreeParams { max_depth: Some(25), ..TreeParams::default() },
            rfr: ForestParams::random_forest(100, Some(25)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeLocOptions {
    pub components: ComponentParams,
    /// Seeded random partition instead of contiguous thirds.
    pub shuffle: bool,
    /// Fit the combiner on a held-out 20% rather than on the full data.
    pub combiner_holdout: bool,
    pub mode: CombinerMode,
}

impl Default for TreeLocOptions {
    fn default() -> Self {
        Self {
            components: ComponentParams::default(),
            shuffle: false,
            combiner_holdout: false,
            mode: CombinerMode::Fitted,
        }
    }
}

pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLocModel {
    pub etr: PositionModel,
    pub dtr: PositionModel,
    pub rfr: PositionModel,
    /// `(a1, W1, W2, W3)`.
    pub combiner_x: [f64; 4],
    /// `(a2, W1', W2', W3')`.
    pub combiner_y: [f64; 4],
    pub mode: CombinerMode,
}

/// `c[0] + c[1] p[0] + c[2] p[1] + c[3] p[2]`.
pub fn combine(c: &[f64; 4], p: [f64; 3]) -> f64 {
    c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[2]
}

/// Least-squares combiner for one coordinate. Collinear component outputs
/// get the minimal-norm solution.
pub fn fit_combiner(component_predictions: &[[f64; 3]], truth: &[f64]) -> Result<[f64; 4]> {
    let rows: Vec<Vec<f64>> = component_predictions.iter().map(|p| p.to_vec()).collect();
    let m = fit_linear(&rows, truth)?;
    Ok([m.intercept, m.weights[0], m.weights[1], m.weights[2]])
}

/// Partition of row indices into the three component sets and the combiner set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub thirds: [Vec<usize>; 3],
    pub combiner: Vec<usize>,
}

pub fn partition(n: usize, options: &TreeLocOptions, seed: u64) -> Result<Partition> {
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_SAMPLES, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if options.shuffle {
        order.shuffle(&mut rng::seeded(seed));
    }
    let (fit_rows, combiner) = if options.combiner_holdout {
        let n_hold = ((HOLDOUT_FRACTION * n as f64).round() as usize).max(1);
        if n - n_hold < 3 {
            return Err(Error::TooFewSamples { need: MIN_SAMPLES, got: n });
        }
        (order[..n - n_hold].to_vec(), order[n - n_hold..].to_vec())
    } else {
        (order.clone(), order)
    };
    let third = fit_rows.len() / 3;
    let thirds = [
        fit_rows[..third].to_vec(),
        fit_rows[third..2 * third].to_vec(),
        fit_rows[2 * third..].to_vec(),
    ];
    Ok(Partition { thirds, combiner })
}

fn component_seed(seed: u64, index: u64) -> u64 {
    rng::substream(seed, index).next_u64()
}

pub fn treeloc_fit(ds: &RegressionDataset, seed: u64, options: &TreeLocOptions) -> Result<TreeLocModel> {
    ds.validate()?;
    let part = partition(ds.len(), options, seed)?;
    let c = options.components;
    let specs = [LearnerSpec::ExtraTrees(c.etr), LearnerSpec::Tree(c.dtr), LearnerSpec::RandomForest(c.rfr)];
    let mut fitted = Vec::with_capacity(3);
    for (i, (spec, rows)) in specs.iter().zip(&part.thirds).enumerate() {
        fitted.push(PositionModel::fit(spec, &ds.subset(rows), component_seed(seed, i as u64))?);
    }
    let rfr = fitted.pop().expect("three components");
    let dtr = fitted.pop().expect("three components");
    let etr = fitted.pop().expect("three components");

    let (combiner_x, combiner_y) = match options.mode {
        CombinerMode::FixedPaper => (PAPER_COMBINER_X, PAPER_COMBINER_Y),
        CombinerMode::Fitted => {
            let mut px = Vec::with_capacity(part.combiner.len());
            let mut py = Vec::with_capacity(part.combiner.len());
            for &i in &part.combiner {
                let row = &ds.features[i];
                let (a, b, c) = (etr.predict(row), dtr.predict(row), rfr.predict(row));
                px.push([a.x, b.x, c.x]);
                py.push([a.y, b.y, c.y]);
            }
            let sub = ds.subset(&part.combiner);
            (fit_combiner(&px, &sub.coordinate(0))?, fit_combiner(&py, &sub.coordinate(1))?)
        }
    };
    Ok(TreeLocModel { etr, dtr, rfr, combiner_x, combiner_y, mode: options.mode })
}

impl TreeLocModel {
    /// Component predictions `[etr, dtr, rfr]`.
    pub fn components(&self, row: &[f64]) -> [Position; 3] {
        [self.etr.predict(row), self.dtr.predict(row), self.rfr.predict(row)]
    }

    pub fn combine(&self, c: [Position; 3]) -> Position {
        Position::new(
            combine(&self.combiner_x, [c[0].x, c[1].x, c[2].x]),
            combine(&self.combiner_y, [c[0].y, c[1].y, c[2].y]),
        )
    }
}

pub fn treeloc_predict(model: &TreeLocModel, row: &[f64]) -> Position {
    model.combine(model.components(row))
}
