use crate::protocol::{Bending, Point};

use super::RenderError;

/// Number of uniform parameter steps in the arc-length table.
pub const ARC_SEGMENTS: usize = 256;

/// Cubic Bernstein evaluation of the bending curve at `t ∈ [0, 1]`.
pub fn bezier_point(b: &Bending, t: f64) -> Point {
    let [p0, p1, p2, p3] = b.points;
    let u = 1.0 - t;
    let (w0, w1, w2, w3) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    Point::new(
        w0 * p0.x + w1 * p1.x + w2 * p2.x + w3 * p3.x,
        w0 * p0.y + w1 * p1.y + w2 * p2.y + w3 * p3.y,
    )
}

/// First derivative B'(t).
pub fn bezier_derivative(b: &Bending, t: f64) -> Point {
    let [p0, p1, p2, p3] = b.points;
    let u = 1.0 - t;
    let (w0, w1, w2) = (3.0 * u * u, 6.0 * u * t, 3.0 * t * t);
    let (d0, d1, d2) = (p1 - p0, p2 - p1, p3 - p2);
    Point::new(w0 * d0.x + w1 * d1.x + w2 * d2.x, w0 * d0.y + w1 * d1.y + w2 * d2.y)
}

/// Tangent direction at `t`. Where B'(t) vanishes (a control point coinciding
/// with an endpoint) the direction is taken from a small symmetric difference,
/// and failing that from the chord.
fn tangent_angle(b: &Bending, t: f64) -> f64 {
    let d = bezier_derivative(b, t);
    if d.x.hypot(d.y) > 1e-12 {
        return d.y.atan2(d.x);
    }
    let h = 1e-4;
    let a = bezier_point(b, (t - h).max(0.0));
    let c = bezier_point(b, (t + h).min(1.0));
    let d = c - a;
    if d.x.hypot(d.y) > 0.0 {
        return d.y.atan2(d.x);
    }
    let chord = b.points[3] - b.points[0];
    chord.y.atan2(chord.x)
}

/// Cumulative chord lengths over a uniform subdivision of the parameter range,
/// used to invert arc length.
#[derive(Debug, Clone)]
pub struct ArcTable {
    bending: Bending,
    cumulative: Vec<f64>,
}

impl ArcTable {
    pub fn new(b: &Bending) -> Result<Self, RenderError> {
        let mut cumulative = Vec::with_capacity(ARC_SEGMENTS + 1);
        cumulative.push(0.0);
        let mut prev = b.points[0];
        let mut acc = 0.0;
        for i in 1..=ARC_SEGMENTS {
            let p = bezier_point(b, i as f64 / ARC_SEGMENTS as f64);
            acc += prev.distance(p);
            cumulative.push(acc);
            prev = p;
        }
        if !(acc > 0.0) {
            return Err(RenderError::DegenerateCurve);
        }
        Ok(Self { bending: *b, cumulative })
    }

    pub fn total_length(&self) -> f64 {
        self.cumulative[ARC_SEGMENTS]
    }

    /// Curve parameter at arc length `len ∈ [0, total]`.
    fn parameter_at(&self, len: f64) -> f64 {
        let c = &self.cumulative;
        // First index whose cumulative length reaches `len`.
        let hi = c.partition_point(|&v| v < len).clamp(1, ARC_SEGMENTS);
        let lo = hi - 1;
        let span = c[hi] - c[lo];
        let frac = if span > 0.0 { (len - c[lo]) / span } else { 0.0 };
        (lo as f64 + frac) / ARC_SEGMENTS as f64
    }

    /// Point and tangent angle at arc length `len`. Lengths outside the curve
    /// extrapolate linearly along the end tangents.
    pub fn at_length(&self, len: f64) -> (Point, f64) {
        let total = self.total_length();
        let b = &self.bending;
        if len < 0.0 {
            let a = tangent_angle(b, 0.0);
            return (b.points[0] + Point::new(a.cos(), a.sin()) * len, a);
        }
        if len > total {
            let a = tangent_angle(b, 1.0);
            return (b.points[3] + Point::new(a.cos(), a.sin()) * (len - total), a);
        }
        let t = self.parameter_at(len);
        (bezier_point(b, t), tangent_angle(b, t))
    }

    /// Point and tangent angle at arc-length fraction `s ∈ [0, 1]`.
    pub fn at_fraction(&self, s: f64) -> (Point, f64) {
        self.at_length(s * self.total_length())
    }
}

/// Point and tangent angle at arc-length fraction `s` along a followed curve.
pub fn arc_length_param(b: &Bending, s: f64) -> Result<(Point, f64), RenderError> {
    Ok(ArcTable::new(b)?.at_fraction(s))
}
