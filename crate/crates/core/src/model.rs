//! Domain types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RSSI value used by the iBeacon data to mark an out-of-range beacon.
pub const OUT_OF_RANGE_DBM: f64 = -200.0;

/// A point in centimeters. `z` is zero for planar work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub const fn new_3d(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_meters(x: f64, y: f64) -> Self {
        Self::new(x * 100.0, y * 100.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self { x: self.x + dx, y: self.y + dy, z: self.z }
    }
}

/// A reference node with a known (possibly noisily known) position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: String,
    pub position: Position,
    /// Standard deviation of the anchor coordinate noise, per axis (cm).
    pub sigma_a: f64,
    /// Standard deviation of the shadowing on this anchor's RSSI (dB).
    pub sigma_p: f64,
}

impl Anchor {
    pub fn new(id: impl Into<String>, position: Position) -> Self {
        Self { id: id.into(), position, sigma_a: 0.0, sigma_p: 0.0 }
    }

    pub fn with_noise(mut self, sigma_a: f64, sigma_p: f64) -> Self {
        self.sigma_a = sigma_a;
        self.sigma_p = sigma_p;
        self
    }
}

/// Parameters of the log-distance path-loss model
/// `RSSI(d) = p0 - 10 eta log10(d / d0) + X`, `X ~ N(0, sigma_shadow^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Received power at the reference distance (dBm).
    pub p0: f64,
    /// Reference distance (cm).
    pub d0: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_shadow: f64,
}

impl Default for PathLossParams {
    /// -40 dBm at 1 m, free-space exponent, 2 dB shadowing. These defaults are
    /// this crate's choice, not measured values.
    fn default() -> Self {
        Self { p0: -40.0, d0: 100.0, eta: 2.0, sigma_shadow: 2.0 }
    }
}

impl PathLossParams {
    pub fn new(p0: f64, d0: f64, eta: f64, sigma_shadow: f64) -> Result<Self> {
        let p = Self { p0, d0, eta, sigma_shadow };
        p.validate()?;
        Ok(p)
    }

    /// Adapter for the `RSSI = -(10 n log10(d) + A)` convention with `d` in
    /// meters: equivalent to `p0 = -A` at `d0 = 1 m`.
    pub fn from_offset_convention(n: f64, a: f64, sigma_shadow: f64) -> Result<Self> {
        Self::new(-a, 100.0, n, sigma_shadow)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.d0 > 0.0) || !self.d0.is_finite() {
            return Err(Error::invalid("d0", format!("must be > 0, got {}", self.d0)));
        }
        if !(self.sigma_shadow >= 0.0) {
            return Err(Error::invalid(
                "sigma_shadow",
                format!("must be >= 0, got {}", self.sigma_shadow),
            ));
        }
        if !self.p0.is_finite() {
            return Err(Error::invalid("p0", "must be finite"));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle (cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Position,
    pub max: Position,
}

impl Bounds {
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Position>) -> Self {
        let mut min = Position::new(f64::INFINITY, f64::INFINITY);
        let mut max = Position::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn diameter(&self) -> f64 {
        self.min.distance(&self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub anchors: Vec<Anchor>,
    pub bounds: Bounds,
}

impl Scene {
    /// Builds a scene whose bounds enclose the anchors.
    pub fn new(anchors: Vec<Anchor>) -> Self {
        let bounds = Bounds::enclosing(anchors.iter().map(|a| &a.position));
        Self { anchors, bounds }
    }

    pub fn from_positions(positions: &[Position]) -> Self {
        Self::new(
            positions
                .iter()
                .enumerate()
                .map(|(i, p)| Anchor::new(format!("A{}", i + 1), *p))
                .collect(),
        )
    }

    pub fn positions(&self) -> Vec<Position> {
        self.anchors.iter().map(|a| a.position).collect()
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// One RSSI snapshot: a value per anchor, or `None` when out of range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub rssi: Vec<Option<f64>>,
    pub timestamp: Option<u64>,
}

impl MeasurementSet {
    pub fn new(rssi: Vec<Option<f64>>) -> Self {
        Self { rssi, timestamp: None }
    }

    /// Masks every value equal to `sentinel`.
    pub fn from_raw(values: &[f64], sentinel: f64) -> Self {
        Self::new(values.iter().map(|&v| (v != sentinel).then_some(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.rssi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rssi.is_empty()
    }

    /// Indices of anchors with a usable reading.
    pub fn in_range(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rssi.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v)))
    }
}

/// Checks that a scene has at least three anchors spanning the plane.
///
/// The anchors are rejected as collinear when the smallest singular value of
/// the centered coordinate matrix falls below `1e-6 * diameter`.
pub fn validate_scene(scene: Scene) -> Result<Scene> {
    let m = scene.anchors.len();
    if m < 3 {
        return Err(Error::TooFewAnchors { need: 3, got: m });
    }
    for a in &scene.anchors {
        if !a.position.is_finite() {
            return Err(Error::invalid("anchor", format!("{} has non-finite coordinates", a.id)));
        }
        if !(a.sigma_a >= 0.0) || !(a.sigma_p >= 0.0) {
            return Err(Error::invalid("anchor", format!("{} has a negative noise std", a.id)));
        }
    }
    for (i, a) in scene.anchors.iter().enumerate() {
        if scene.anchors[..i].iter().any(|b| b.id == a.id) {
            return Err(Error::invalid("anchor", format!("duplicate id {}", a.id)));
        }
    }
    let positions = scene.positions();
    let diameter = Bounds::enclosing(&positions).diameter();
    if smallest_spread(&positions) <= 1e-6 * diameter || diameter == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(scene)
}

/// Smallest singular value of the centered `M x 2` coordinate matrix.
pub(crate) fn smallest_spread(points: &[Position]) -> f64 {
    let m = points.len() as f64;
    let (cx, cy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (cx, cy) = (cx / m, cy / m);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // eigenvalues of the 2x2 scatter matrix are the squared singular values
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    (half_trace - disc).max(0.0).sqrt()
}

/// Planar Euclidean distance between an estimate and the truth.
pub fn position_error(predicted: &Position, actual: &Position) -> f64 {
    (predicted.x - actual.x).hypot(predicted.y - actual.y)
}
