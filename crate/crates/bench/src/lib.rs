//! Deterministic fixtures shared by the benchmarks.

use rssiloc_core::learners::RegressionDataset;
use rssiloc_core::Position;

/// `m` anchors spread on a circle of radius 200 cm around (200, 200).
pub fn ring_anchors(m: usize) -> Vec<Position> {
    (0..m)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / m as f64 + 0.3;
            Position::new(200.0 + 200.0 * a.cos(), 200.0 + 200.0 * a.sin())
        })
        .collect()
}

pub fn exact_distances(anchors: &[Position], target: Position) -> Vec<f64> {
    anchors.iter().map(|a| a.distance(&target)).collect()
}

/// Constant level plus a bounded, non-periodic wobble.
pub fn wobbly_signal(n: usize) -> Vec<f64> {
    (0..n).map(|i| -60.0 + 3.0 * ((i as f64 * 0.7).sin() + (i as f64 * 1.3).cos())).collect()
}

/// Fingerprint rows for three anchors with a deterministic perturbation.
pub fn fingerprint_dataset(n: usize) -> RegressionDataset {
    let anchors = ring_anchors(3);
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let t = Position::new(20.0 + (i * 37 % 360) as f64, 20.0 + (i * 53 % 360) as f64);
        let row = anchors
            .iter()
            .enumerate()
            .map(|(k, a)| -40.0 - 20.0 * (a.distance(&t).max(1.0) / 100.0).log10() + ((i + k) as f64).sin())
            .collect();
        features.push(row);
        targets.push([t.x, t.y]);
    }
    RegressionDataset { features, targets }
}
