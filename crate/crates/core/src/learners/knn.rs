//! k-nearest-neighbor zone classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ClassificationDataset, Zone};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Majority vote over the `k` nearest training rows.
///
/// Neighbors are ordered by distance with a stable sort, so equidistant rows
/// keep their training order. Vote ties go to the lowest zone index.
pub fn knn_classify(train: &ClassificationDataset, query: &[f64], k: usize) -> Result<(Zone, [f64; 4])> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if k > train.len() {
        return Err(Error::KTooLarge { k, n: train.len() });
    }
    if query.len() != train.n_features() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} features, training set has {}",
            query.len(),
            train.n_features()
        )));
    }
    let mut order: Vec<(f64, usize)> =
        train.features.iter().enumerate().map(|(i, row)| (euclidean(row, query), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut votes = [0usize; 4];
    for &(_, i) in &order[..k] {
        votes[train.zones[i].index()] += 1;
    }
    let mut best = 0;
    for j in 1..4 {
        if votes[j] > votes[best] {
            best = j;
        }
    }
    let probs = votes.map(|v| v as f64 / k as f64);
    Ok((Zone::from_index(best).expect("zone index"), probs))
}

/// Picks `k` from `candidates` by accuracy on a seeded validation split of
/// `train`; ties go to the smaller `k`. Returns the choice and every score.
pub fn tune_k(
    train: &ClassificationDataset,
    candidates: impl IntoIterator<Item = usize>,
    validation_fraction: f64,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    let (fit, val) = train.shuffled_split(validation_fraction, seed)?;
    if val.is_empty() {
        return Err(Error::TooFewSamples { need: 2, got: train.len() });
    }
    let mut scores = Vec::new();
    for k in candidates {
        if k == 0 || k > fit.len() {
            continue;
        }
        let hits = val
            .features
            .iter()
            .zip(&val.zones)
            .map(|(q, z)| knn_classify(&fit, q, k).map(|r| (r.0 == *z) as usize))
            .sum::<Result<usize>>()?;
        scores.push((k, hits as f64 / val.len() as f64));
    }
    let best = scores
        .iter()
        .fold(None::<(usize, f64)>, |b, &(k, a)| match b {
            Some((_, ba)) if ba >= a => b,
            _ => Some((k, a)),
        })
        .ok_or(Error::KTooLarge { k: 1, n: fit.len() })?;
    Ok((best.0, scores))
}

/// Stored training set plus the chosen `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: Vec<Vec<f64>>,
    pub zones: Vec<Zone>,
}

impl KnnModel {
    pub fn fit(train: &ClassificationDataset, k: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 || k > train.len() {
            return Err(Error::KTooLarge { k, n: train.len() });
        }
        Ok(Self { k, features: train.features.clone(), zones: train.zones.clone() })
    }

    fn as_dataset(&self) -> ClassificationDataset {
        ClassificationDataset {
            locations: Vec::new(),
            features: self.features.clone(),
            zones: self.zones.clone(),
        }
    }

    pub fn predict(&self, query: &[f64]) -> Result<(Zone, [f64; 4])> {
        knn_classify(&self.as_dataset(), query, self.k)
    }

    pub fn predict_all(&self, queries: &[Vec<f64>]) -> Result<Vec<Zone>> {
        let ds = self.as_dataset();
        queries.iter().map(|q| knn_classify(&ds, q, self.k).map(|r| r.0)).collect()
    }
}
