//! CART regression trees.
//!
//! A node is split on the `(feature, threshold)` pair that minimizes the sum
//! of squared errors of the two children, and each leaf predicts the mean of
//! its training targets. Two split searches are available:
//!
//! - [`SplitMode::Exhaustive`]: every midpoint between consecutive distinct
//!   feature values.
//! - [`SplitMode::Random`]: one uniform threshold per feature between the
//!   node's min and max (extremely randomized trees); the best of those wins.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    /// Minimum number of samples in each leaf.
    pub min_leaf: usize,
    pub split_mode: SplitMode,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: Some(25), min_leaf: 1, split_mode: SplitMode::Exhaustive }
    }
}

/// Flat node storage; children are indices into [`DecisionTree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64, samples: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Index of the leaf `row` falls into.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if row[feature] <= threshold { left } else { right };
        }
        i
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, left).max(rec(nodes, right)),
            }
        }
        rec(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Fits a tree on one target column. Random split mode draws from substream
/// 0 of `seed`, the same stream a one-tree forest uses.
pub fn fit_tree(features: &[Vec<f64>], target: &[f64], params: &TreeParams, seed: u64) -> Result<DecisionTree> {
    let mut rng = rng::substream(seed, 0);
    let rows: Vec<usize> = (0..features.len()).collect();
    fit_tree_on(features, target, &rows, params, &mut rng)
}

pub(crate) fn fit_tree_on(
    features: &[Vec<f64>],
    target: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    if rows.is_empty() || features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != target.len() {
        return Err(Error::LengthMismatch { expected: features.len(), got: target.len() });
    }
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf", "must be at least 1"));
    }
    let mut builder = Builder { x: features, y: target, params, rng, nodes: Vec::new() };
    let mut rows = rows.to_vec();
    builder.grow(&mut rows, 0);
    Ok(DecisionTree { nodes: builder.nodes })
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    rng: &'a mut Rng,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    sse: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let sse: f64 = rows.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, samples: n });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let pure = rows.iter().all(|&i| self.y[i] == self.y[rows[0]]);
        if !depth_ok || pure || n < 2 * self.params.min_leaf {
            return id;
        }
        let best = match self.params.split_mode {
            SplitMode::Exhaustive => self.best_exhaustive(rows, mean),
            SplitMode::Random => self.best_random(rows, mean),
        };
        let Some(best) = best else { return id };
        // only splits that strictly reduce the squared error
        if !(best.sse < sse * (1.0 - 1e-12)) {
            return id;
        }
        let mid = partition(rows, |i| self.x[i][best.feature] <= best.threshold);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn best_exhaustive(&self, rows: &[usize], mean: f64) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        let n_features = self.x[rows[0]].len();
        let mut order = rows.to_vec();
        let mut best: Option<Split> = None;
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let total: f64 = order.iter().map(|&i| self.y[i] - mean).sum();
            let total_sq: f64 = order.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 0..n - 1 {
                let r = self.y[order[k]] - mean;
                sum_l += r;
                sq_l += r * r;
                let n_l = k + 1;
                let n_r = n - n_l;
                let (v, next) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if n_l < min_leaf || n_r < min_leaf || v == next {
                    continue;
                }
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let sse = (sq_l - sum_l * sum_l / n_l as f64) + (sq_r - sum_r * sum_r / n_r as f64);
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split { feature: f, threshold, sse });
                }
            }
        }
        best
    }

    fn best_random(&mut self, rows: &[usize], mean: f64) -> Option<Split> {
        let n_features = self.x[rows[0]].len();
        let mut best: Option<Split> = None;
        for f in 0..n_features {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(self.x[i][f]), hi.max(self.x[i][f]))
            });
            if !(lo < hi) {
                continue;
            }
            let threshold = self.rng.random_range(lo..hi);
            let (mut n_l, mut s_l, mut q_l, mut s_r, mut q_r) = (0usize, 0.0, 0.0, 0.0, 0.0);
            for &i in rows {
                let r = self.y[i] - mean;
                if self.x[i][f] <= threshold {
                    n_l += 1;
                    s_l += r;
                    q_l += r * r;
                } else {
                    s_r += r;
                    q_r += r * r;
                }
            }
            let n_r = rows.len() - n_l;
            if n_l < self.params.min_leaf || n_r < self.params.min_leaf {
                continue;
            }
            let sse = (q_l - s_l * s_l / n_l as f64) + (q_r - s_r * s_r / n_r as f64);
            if best.as_ref().is_none_or(|b| sse < b.sse) {
                best = Some(Split { feature: f, threshold, sse });
            }
        }
        best
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| pred(i));
    let mid = yes.len();
    yes.extend(no);
    rows.copy_from_slice(&yes);
    mid
}
