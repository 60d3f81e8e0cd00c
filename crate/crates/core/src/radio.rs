//! Log-distance path loss and synthetic measurement generation.

use rand::{Rng as _, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_scene, Bounds, MeasurementSet, PathLossParams, Position, Scene};
use crate::rng;

/// Noise injected by [`synthesize_measurements`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Anchor coordinate noise std per axis (cm).
    pub sigma_a: f64,
    /// Shadowing std (dB).
    pub sigma_p: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma_a: 0.0, sigma_p: 2.0, seed: rng::DEFAULT_SEED }
    }
}

/// Mean received power at distance `d` (cm).
pub fn rssi_from_distance(d: f64, params: &PathLossParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(params.p0 - 10.0 * params.eta * (d / params.d0).log10())
}

/// Inverts the path-loss model: `d = d0 * 10^((p0 - rssi) / (10 eta))`.
pub fn distance_from_rssi(rssi: f64, params: &PathLossParams) -> f64 {
    params.d0 * 10f64.powf((params.p0 - rssi) / (10.0 * params.eta))
}

/// Constant `u = ln(10) / (5 sqrt(2) eta)` relating shadowing in dB to the
/// log of squared distance: `d_hat^2 = d^2 exp(sqrt(2) u n)`.
pub fn squared_distance_log_scale(eta: f64) -> f64 {
    std::f64::consts::LN_10 / (5.0 * std::f64::consts::SQRT_2 * eta)
}

/// One Monte-Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// Anchor coordinates as known to the estimator (truth plus noise).
    pub anchors: Vec<Position>,
    pub measurements: MeasurementSet,
}

/// Draws `trials` noisy snapshots of the scene as seen from `target`.
///
/// Each trial perturbs every anchor coordinate by `N(0, sigma_a^2)` and adds
/// `N(0, sigma_p^2)` shadowing to the mean RSSI. Trial `k` uses RNG substream
/// `k` of `noise.seed`, so output is identical for any thread count.
pub fn synthesize_measurements(
    scene: &Scene,
    target: &Position,
    params: &PathLossParams,
    noise: &NoiseSpec,
    trials: usize,
) -> Result<Vec<Trial>> {
    let scene = validate_scene(scene.clone())?;
    params.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !(noise.sigma_a >= 0.0) || !(noise.sigma_p >= 0.0) {
        return Err(Error::invalid("noise", "standard deviations must be >= 0"));
    }
    let truth = scene.positions();
    let mean_rssi = truth
        .iter()
        .map(|a| rssi_from_distance(a.distance(target), params))
        .collect::<Result<Vec<_>>>()?;

    Ok((0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::substream(noise.seed, k as u64);
            let mut anchors = Vec::with_capacity(truth.len());
            let mut rssi = Vec::with_capacity(truth.len());
            for (a, &mean) in truth.iter().zip(&mean_rssi) {
                let nx: f64 = StandardNormal.sample(&mut rng);
                let ny: f64 = StandardNormal.sample(&mut rng);
                let np: f64 = StandardNormal.sample(&mut rng);
                anchors.push(Position::new_3d(
                    a.x + noise.sigma_a * nx,
                    a.y + noise.sigma_a * ny,
                    a.z,
                ));
                rssi.push(Some(mean + noise.sigma_p * np));
            }
            Trial {
                anchors,
                measurements: MeasurementSet { rssi, timestamp: Some(k as u64) },
            }
        })
        .collect())
}

/// `n` targets drawn uniformly inside `bounds` from the base stream of `seed`.
pub fn random_targets(bounds: &Bounds, n: usize, seed: u64) -> Vec<Position> {
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let x = bounds.min.x + (bounds.max.x - bounds.min.x) * rng.random::<f64>();
            let y = bounds.min.y + (bounds.max.y - bounds.min.y) * rng.random::<f64>();
            Position::new(x, y)
        })
        .collect()
}

/// `samples` trials for every target. Target `i` draws its trials from a
/// seed taken from substream `i` of `noise.seed`.
pub fn simulate_fingerprints(
    scene: &Scene,
    params: &PathLossParams,
    noise: &NoiseSpec,
    targets: &[Position],
    samples: usize,
) -> Result<Vec<(Position, Trial)>> {
    let mut out = Vec::with_capacity(targets.len() * samples);
    for (i, t) in targets.iter().enumerate() {
        let spec = NoiseSpec { seed: rng::substream(noise.seed, i as u64).next_u64(), ..*noise };
        out.extend(synthesize_measurements(scene, t, params, &spec, samples)?.into_iter().map(|tr| (*t, tr)));
    }
    Ok(out)
}
