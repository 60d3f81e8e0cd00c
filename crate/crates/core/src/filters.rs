//! One-dimensional RSSI smoothing.
//!
//! All filters are length preserving. Edge handling: the moving average uses
//! a shrinking causal window during warm-up, the median clamps its window at
//! the boundaries, and the Gaussian renormalizes the kernel over the taps
//! that fall inside the signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal moving average: `out[i]` is the mean of the last `min(i + 1, window)` samples.
pub fn moving_average(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    if window == 0 {
        return Err(Error::ZeroWindow);
    }
    Ok((0..signal.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            signal[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect())
}

/// Median over `signal[n - half_width ..= n + half_width]`, clamped at the ends.
/// Even-sized windows average the two central order statistics.
pub fn median_filter(signal: &[f64], half_width: usize) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let len = signal.len();
    let mut buf = Vec::with_capacity(2 * half_width + 1);
    Ok((0..len)
        .map(|n| {
            let lo = n.saturating_sub(half_width);
            let hi = (n + half_width).min(len - 1);
            buf.clear();
            buf.extend_from_slice(&signal[lo..=hi]);
            buf.sort_by(f64::total_cmp);
            let k = buf.len();
            if k % 2 == 1 {
                buf[k / 2]
            } else {
                0.5 * (buf[k / 2 - 1] + buf[k / 2])
            }
        })
        .collect())
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|w| w / total).collect())
}

/// Convolution with [`gaussian_kernel`]; near the edges the in-range taps are
/// renormalized to sum to one.
pub fn gaussian_filter(signal: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(sigma)?;
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let radius = (kernel.len() / 2) as isize;
    let len = signal.len() as isize;
    Ok((0..len)
        .map(|n| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, w) in kernel.iter().enumerate() {
                let idx = n + j as isize - radius;
                if (0..len).contains(&idx) {
                    acc += w * signal[idx as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect())
}

/// Scalar random-walk Kalman filter state (`A = H = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    /// Current estimate (dBm).
    pub x_hat: f64,
    /// Error variance (dB^2).
    pub p: f64,
    /// Process-noise variance (dB^2).
    pub q: f64,
    /// Measurement-noise variance (dB^2).
    pub r: f64,
    /// Gain used by the most recent update (0 before any update).
    pub gain: f64,
}

impl KalmanState {
    pub fn new(x_hat: f64, p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p >= 0.0) || !(q >= 0.0) || !(r >= 0.0) {
            return Err(Error::invalid("kalman", "variances must be >= 0"));
        }
        if q == 0.0 && r == 0.0 {
            return Err(Error::invalid("kalman", "q and r cannot both be zero"));
        }
        Ok(Self { x_hat, p, q, r, gain: 0.0 })
    }

    /// Defaults for a raw RSSI stream: `x0` is the first sample, `p0 = 1`,
    /// `q = 1e-4`, and `r` is the sample variance of the first ten samples
    /// (4.0 when fewer than two samples or zero variance).
    pub fn for_signal(signal: &[f64]) -> Result<Self> {
        let first = *signal.first().ok_or(Error::EmptySignal)?;
        let head = &signal[..signal.len().min(10)];
        let r = if head.len() >= 2 {
            let mean = head.iter().sum::<f64>() / head.len() as f64;
            head.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (head.len() - 1) as f64
        } else {
            0.0
        };
        let r = if r > 0.0 { r } else { 4.0 };
        Self::new(first, 1.0, 1e-4, r)
    }
}

/// One predict/update cycle.
pub fn kalman_step(state: &KalmanState, z: f64) -> KalmanState {
    let prior = state.p + state.q;
    let gain = if prior + state.r > 0.0 { prior / (prior + state.r) } else { 1.0 };
    KalmanState {
        x_hat: state.x_hat + gain * (z - state.x_hat),
        // (1 - K) * prior
        p: if prior + state.r > 0.0 { prior * state.r / (prior + state.r) } else { 0.0 },
        gain,
        ..*state
    }
}

/// Runs [`kalman_step`] over the whole signal and returns the estimates.
pub fn kalman_filter(signal: &[f64], init: KalmanState) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let mut state = init;
    Ok(signal
        .iter()
        .map(|&z| {
            state = kalman_step(&state, z);
            state.x_hat
        })
        .collect())
}

/// A named filter with its parameters, as selected from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    MovingAverage { window: usize },
    Median { half_width: usize },
    Gaussian { sigma: f64 },
    /// `None` fields fall back to [`KalmanState::for_signal`] defaults.
    Kalman { p0: Option<f64>, q: Option<f64>, r: Option<f64> },
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::MovingAverage { window: 5 }
    }
}

impl FilterSpec {
    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        match *self {
            FilterSpec::MovingAverage { window } => moving_average(signal, window),
            FilterSpec::Median { half_width } => median_filter(signal, half_width),
            FilterSpec::Gaussian { sigma } => gaussian_filter(signal, sigma),
            FilterSpec::Kalman { p0, q, r } => {
                let mut init = KalmanState::for_signal(signal)?;
                init.p = p0.unwrap_or(init.p);
                init.q = q.unwrap_or(init.q);
                init.r = r.unwrap_or(init.r);
                let init = KalmanState::new(init.x_hat, init.p, init.q, init.r)?;
                kalman_filter(signal, init)
            }
        }
    }
}
