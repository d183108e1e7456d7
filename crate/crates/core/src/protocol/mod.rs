//! The text rendering protocol: a canvas size plus an ordered list of text
//! instances, each carrying geometric, semantic, appearance and relational
//! attributes.
//!
//! Coordinates are canvas pixels with the origin at the top-left and y
//! pointing down. `theta` is measured counter-clockwise (as seen on screen)
//! from +x. `(x, y)` is the top-left corner of the unrotated box; rotation
//! pivots about the box center.
//!
//! The JSON wire format lives in [`json`], invariant checking in
//! [`validate`].

mod json;
mod validate;

use std::f64::consts::TAU;

pub use json::{parse_protocol, serialize_protocol};
pub use validate::{validate, Violation};

/// Default line pitch multiplier when `line_height` is absent.
pub const DEFAULT_LINE_HEIGHT: f64 = 1.2;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("range error: {}", join_violations(.0))]
    Range(Vec<Violation>),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("invalid protocol: {}", join_violations(.0))]
    InvalidProtocol(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextProtocol {
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub instances: Vec<TextInstance>,
}

impl TextProtocol {
    pub fn empty(canvas_width: u32, canvas_height: u32) -> Self {
        Self { canvas_width, canvas_height, instances: Vec::new() }
    }

    /// Instance indices sorted by ascending z-order (stable for ties).
    pub fn z_sorted(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.instances.len()).collect();
        idx.sort_by_key(|&i| self.instances[i].relational.z_order);
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextInstance {
    pub geometry: Geometry,
    pub semantic: Semantic,
    pub appearance: Appearance,
    pub relational: Relational,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub bending: Bending,
}

impl Geometry {
    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Cubic Bézier text path. With `follow == false` the control points are
/// carried but ignored by the renderer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bending {
    pub points: [Point; 4],
    pub follow: bool,
}

impl Bending {
    pub fn straight() -> Self {
        Self::default()
    }

    pub fn curve(points: [Point; 4]) -> Self {
        Self { points, follow: true }
    }

    /// All four control points coincide, so the curve has no length.
    pub fn is_degenerate(&self) -> bool {
        let [p0, p1, p2, p3] = self.points;
        p3 == p0 && p1 == p0 && p2 == p0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Ltr,
    Rtl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Semantic {
    pub text: String,
    pub direction: Direction,
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorSpec {
    Solid(Rgb),
    LinearGradient { stops: [Rgb; 2], angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowSpec {
    pub color: Rgb,
    pub offset_angle: f64,
    pub offset_distance: f64,
    pub blur_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    pub font_id: String,
    pub font_size: f64,
    pub fill: ColorSpec,
    pub stroke_width: f64,
    pub stroke_color: ColorSpec,
    pub shadow: Option<ShadowSpec>,
    pub line_height: f64,
    pub char_spacing: f64,
    pub italic: bool,
    pub bold: bool,
    pub underline: bool,
}

impl Appearance {
    /// Plain appearance: solid fill, no stroke, no shadow, default spacing.
    pub fn plain(font_id: impl Into<String>, font_size: f64, fill: Rgb) -> Self {
        Self {
            font_id: font_id.into(),
            font_size,
            fill: ColorSpec::Solid(fill),
            stroke_width: 0.0,
            stroke_color: ColorSpec::Solid([0, 0, 0]),
            shadow: None,
            line_height: DEFAULT_LINE_HEIGHT,
            char_spacing: 0.0,
            italic: false,
            bold: false,
            underline: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alignment {
    Left,
    Center,
    Right,
    Justify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relational {
    pub alignment: Alignment,
    pub z_order: i64,
}

/// Whether an angle lies in the half-open range `[0, 2π)`.
pub(crate) fn angle_in_range(a: f64) -> bool {
    a.is_finite() && (0.0..TAU).contains(&a)
}
