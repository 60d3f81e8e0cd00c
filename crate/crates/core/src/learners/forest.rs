//! Averaging tree ensembles (random forest and extra trees).

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::tree::{fit_tree_on, DecisionTree, SplitMode, TreeParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Resample `N` rows with replacement for each tree.
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub split_mode: SplitMode,
}

impl ForestParams {
    pub fn random_forest(n_trees: usize, max_depth: Option<usize>) -> Self {
        Self { n_trees, bootstrap: true, max_depth, min_leaf: 1, split_mode: SplitMode::Exhaustive }
    }

    pub fn extra_trees(n_trees: usize, max_depth: Option<usize>) -> Self {
        Self { n_trees, bootstrap: false, max_depth, min_leaf: 1, split_mode: SplitMode::Random }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
}

impl Forest {
    /// Arithmetic mean of the member predictions.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Fits `n_trees` trees; tree `t` draws its bootstrap sample and random
/// thresholds from substream `t` of `seed`, so the result does not depend on
/// how many threads fit the members.
pub fn fit_forest(features: &[Vec<f64>], target: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees", "must be at least 1"));
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = features.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        split_mode: params.split_mode,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(features, target, &rows, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees })
}
