//! Sphere-intersection trilateration from three anchors.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::Position;

fn vec3(p: &Position) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

fn pos(v: Vector3<f64>) -> Position {
    Position::new_3d(v.x, v.y, v.z)
}

/// Orthonormal frame with the first anchor at the origin, the second on +x
/// and the third in the xy-plane.
struct Frame {
    origin: Vector3<f64>,
    ex: Vector3<f64>,
    ey: Vector3<f64>,
    ez: Vector3<f64>,
    /// x coordinate of anchor 2.
    d: f64,
    /// (x, y) coordinates of anchor 3.
    i: f64,
    j: f64,
}

impl Frame {
    fn new(anchors: &[Position; 3]) -> Result<Self> {
        let (a1, a2, a3) = (vec3(&anchors[0]), vec3(&anchors[1]), vec3(&anchors[2]));
        let scale = (a2 - a1).norm().max((a3 - a1).norm());
        let d = (a2 - a1).norm();
        if !(d > 1e-12 * scale) || !scale.is_finite() {
            return Err(Error::CollinearAnchors);
        }
        let ex = (a2 - a1) / d;
        let i = ex.dot(&(a3 - a1));
        let off = a3 - a1 - ex * i;
        let j = off.norm();
        if !(j > 1e-9 * scale) {
            return Err(Error::CollinearAnchors);
        }
        let ey = off / j;
        Ok(Self { origin: a1, ex, ey, ez: ex.cross(&ey), d, i, j })
    }

    /// In-frame (x, y) of the radical point and the squared height above it.
    fn solve(&self, r: &[f64; 3]) -> (f64, f64, f64) {
        let x = (r[0] * r[0] - r[1] * r[1] + self.d * self.d) / (2.0 * self.d);
        let y = (r[0] * r[0] - r[2] * r[2] + self.i * self.i + self.j * self.j - 2.0 * self.i * x)
            / (2.0 * self.j);
        (x, y, r[0] * r[0] - x * x - y * y)
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    match radii.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        Some(&r) => Err(Error::invalid("radius", format!("must be finite and >= 0, got {r}"))),
        None => Ok(()),
    }
}

/// Intersects three spheres. Returns both candidates (`+z` first, relative
/// to the anchor plane); they coincide when the target lies in that plane.
///
/// A negative squared height within `1e-9 * max(r_i^2)` is clamped to zero; beyond
/// that the spheres do not meet and [`Error::NoIntersection`] is returned.
pub fn trilaterate(anchors: &[Position; 3], radii: &[f64; 3]) -> Result<[Position; 2]> {
    check_radii(radii)?;
    let frame = Frame::new(anchors)?;
    let (x, y, z2) = frame.solve(radii);
    let tol = 1e-9 * radii.iter().fold(0.0_f64, |m, r| m.max(r * r));
    if z2 < -tol {
        return Err(Error::NoIntersection { residual: z2 });
    }
    let z = z2.max(0.0).sqrt();
    let base = frame.origin + frame.ex * x + frame.ey * y;
    Ok([pos(base + frame.ez * z), pos(base - frame.ez * z)])
}

/// Planar trilateration from the first three anchors (`z` ignored).
///
/// Returns the in-plane intersection point of the radical lines, which is the
/// projection of both sphere candidates. Inconsistent (noisy) radii still give
/// an estimate rather than an error.
pub fn trilaterate_2d(anchors: &[Position], radii: &[f64]) -> Result<Position> {
    if anchors.len() < 3 {
        return Err(Error::TooFewAnchors { need: 3, got: anchors.len() });
    }
    if radii.len() != anchors.len() {
        return Err(Error::LengthMismatch { expected: anchors.len(), got: radii.len() });
    }
    check_radii(&radii[..3])?;
    let flat = [
        Position::new(anchors[0].x, anchors[0].y),
        Position::new(anchors[1].x, anchors[1].y),
        Position::new(anchors[2].x, anchors[2].y),
    ];
    let frame = Frame::new(&flat)?;
    let (x, y, _) = frame.solve(&[radii[0], radii[1], radii[2]]);
    let p = frame.origin + frame.ex * x + frame.ey * y;
    Ok(Position::new(p.x, p.y))
}
