//! Scanline polygon fill with 4×4 ordered supersampling.
//!
//! Sample `(i, j)` of pixel `(px, py)` sits at `(px + (i + 0.5)/4,
//! py + (j + 0.5)/4)`. Coverage is the integer count of samples inside the
//! shape under the nonzero winding rule, mapped to alpha as
//! `(count·255 + 8) / 16`. Only edge crossings use floating point.

use crate::protocol::{Point, Rgb};
use crate::raster::{over_pixel, Raster, Rgba};

pub const SUBSAMPLES: i64 = 4;

/// Alpha coverage over a canvas-clipped rectangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
    pub alpha: Vec<u8>,
}

impl Coverage {
    pub fn empty() -> Self {
        Self { x0: 0, y0: 0, width: 0, height: 0, alpha: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0)
    }

    /// Iterates `(x, y, alpha)` in canvas coordinates for nonzero pixels.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u8)> + '_ {
        let w = self.width.max(1) as usize;
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(move |(i, &a)| (self.x0 + (i % w) as u32, self.y0 + (i / w) as u32, a))
    }

    /// Grows the region by `pad` pixels per side (clipped to the canvas),
    /// keeping existing values.
    pub fn padded(&self, pad: u32, canvas_w: u32, canvas_h: u32) -> Coverage {
        if self.width == 0 {
            return self.clone();
        }
        let x0 = self.x0.saturating_sub(pad);
        let y0 = self.y0.saturating_sub(pad);
        let x1 = (self.x0 + self.width + pad).min(canvas_w);
        let y1 = (self.y0 + self.height + pad).min(canvas_h);
        let (w, h) = (x1 - x0, y1 - y0);
        let mut alpha = vec![0u8; (w * h) as usize];
        for row in 0..self.height {
            let src = (row * self.width) as usize;
            let dst = ((row + self.y0 - y0) * w + (self.x0 - x0)) as usize;
            alpha[dst..dst + self.width as usize].copy_from_slice(&self.alpha[src..src + self.width as usize]);
        }
        Coverage { x0, y0, width: w, height: h, alpha }
    }
}

struct Edge {
    a: Point,
    b: Point,
    ymin: f64,
    ymax: f64,
    winding: i32,
}

/// Rasterizes closed polygons (implicitly closed; last vertex joins the
/// first) into coverage clipped to a `canvas_w × canvas_h` canvas.
pub fn rasterize(polygons: &[Vec<Point>], canvas_w: u32, canvas_h: u32) -> Coverage {
    let mut edges = Vec::new();
    let (mut bx0, mut by0, mut bx1, mut by1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for poly in polygons.iter().filter(|p| p.len() >= 3) {
        for (i, &a) in poly.iter().enumerate() {
            let b = poly[(i + 1) % poly.len()];
            bx0 = bx0.min(a.x);
            bx1 = bx1.max(a.x);
            by0 = by0.min(a.y);
            by1 = by1.max(a.y);
            if a.y == b.y {
                continue;
            }
            let (winding, lo, hi) = if a.y < b.y { (1, a, b) } else { (-1, b, a) };
            edges.push(Edge { a: lo, b: hi, ymin: lo.y, ymax: hi.y, winding });
        }
    }
    if edges.is_empty() || !bx0.is_finite() || !by0.is_finite() || !bx1.is_finite() || !by1.is_finite() {
        return Coverage::empty();
    }

    let px0 = (bx0.floor().max(0.0) as i64).min(i64::from(canvas_w));
    let py0 = (by0.floor().max(0.0) as i64).min(i64::from(canvas_h));
    let px1 = (bx1.ceil().max(0.0) as i64 + 1).min(i64::from(canvas_w));
    let py1 = (by1.ceil().max(0.0) as i64 + 1).min(i64::from(canvas_h));
    if px1 <= px0 || py1 <= py0 {
        return Coverage::empty();
    }
    let (w, h) = ((px1 - px0) as usize, (py1 - py0) as usize);
    let mut counts = vec![0u8; w * h];

    edges.sort_by(|e, f| e.ymin.total_cmp(&f.ymin));
    let mut next_edge = 0;
    let mut active: Vec<usize> = Vec::new();
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    let s = SUBSAMPLES as f64;

    for sj in py0 * SUBSAMPLES..py1 * SUBSAMPLES {
        let sy = (sj as f64 + 0.5) / s;
        while next_edge < edges.len() && edges[next_edge].ymin <= sy {
            active.push(next_edge);
            next_edge += 1;
        }
        active.retain(|&e| edges[e].ymax > sy);
        crossings.clear();
        for &e in &active {
            let e = &edges[e];
            if e.ymin <= sy {
                let x = e.a.x + (sy - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y);
                crossings.push((x, e.winding));
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));

        let row = ((sj / SUBSAMPLES) - py0) as usize * w;
        let mut wind = 0;
        let mut span_start = 0.0;
        for &(x, dw) in &crossings {
            let before = wind;
            wind += dw;
            if before == 0 && wind != 0 {
                span_start = x;
            } else if before != 0 && wind == 0 {
                // Samples with center in [span_start, x).
                let first = ((span_start * s - 0.5).ceil() as i64).max(px0 * SUBSAMPLES);
                let last = ((x * s - 0.5).ceil() as i64).min(px1 * SUBSAMPLES);
                for si in first..last {
                    counts[row + (si / SUBSAMPLES - px0) as usize] += 1;
                }
            }
        }
    }

    let alpha = counts.into_iter().map(|c| ((u32::from(c) * 255 + 8) / 16) as u8).collect();
    Coverage { x0: px0 as u32, y0: py0 as u32, width: w as u32, height: h as u32, alpha }
}

/// Signed area (positive for clockwise on a y-down screen).
fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a.x * b.y - b.x * a.y
    })
    .sum::<f64>()
        / 2.0
}

/// Reorients every polygon to the same winding so that nonzero fill computes
/// their union.
pub fn normalize_orientation(polys: &mut [Vec<Point>]) {
    for p in polys {
        if signed_area(p) < 0.0 {
            p.reverse();
        }
    }
}

/// Minkowski sum of the polygons with a disk of radius `r`, as a set of
/// polygons whose union is the dilated shape: the originals, a rectangle per
/// edge and a 16-gon per vertex.
pub fn dilate(polys: &[Vec<Point>], r: f64) -> Vec<Vec<Point>> {
    let mut out: Vec<Vec<Point>> = polys.to_vec();
    if r <= 0.0 {
        return out;
    }
    for poly in polys {
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let d = b - a;
            let len = d.x.hypot(d.y);
            if len > 0.0 {
                let nrm = Point::new(-d.y / len * r, d.x / len * r);
                out.push(vec![a + nrm, b + nrm, b - nrm, a - nrm]);
            }
            out.push(
                (0..16)
                    .map(|k| {
                        let t = f64::from(k) * std::f64::consts::TAU / 16.0;
                        Point::new(a.x + r * t.cos(), a.y + r * t.sin())
                    })
                    .collect(),
            );
        }
    }
    normalize_orientation(&mut out);
    out
}

/// Source-over paints `color(x, y)` at each covered pixel.
pub fn paint(canvas: &mut Raster, cov: &Coverage, mut color: impl FnMut(u32, u32) -> Rgb) {
    paint_with_opacity(canvas, cov, 255, &mut color);
}

/// Like [`paint`], scaling coverage by `opacity / 255` (rounded).
pub fn paint_with_opacity(canvas: &mut Raster, cov: &Coverage, opacity: u8, mut color: impl FnMut(u32, u32) -> Rgb) {
    for (x, y, a) in cov.iter() {
        let a = if opacity == 255 { a } else { ((u32::from(a) * u32::from(opacity) + 127) / 255) as u8 };
        if a == 0 {
            continue;
        }
        let [r, g, b] = color(x, y);
        let top: Rgba = [r, g, b, a];
        let px = canvas.get(x, y);
        canvas.set(x, y, over_pixel(top, px));
    }
}

/// Three passes of a horizontal then vertical box blur of radius `r`, with
/// rounding integer means. Pixels beyond the region count as zero.
pub fn box_blur(cov: &Coverage, r: u32) -> Coverage {
    if r == 0 || cov.width == 0 {
        return cov.clone();
    }
    let (w, h) = (cov.width as usize, cov.height as usize);
    let mut buf: Vec<u32> = cov.alpha.iter().map(|&a| u32::from(a)).collect();
    let mut tmp = vec![0u32; w * h];
    let r = r as usize;
    let win = (2 * r + 1) as u32;
    let blur_line = |src: &[u32], dst: &mut [u32], len: usize, stride: usize, start: usize| {
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let mut sum = 0u32;
            for k in lo..=hi {
                sum += src[start + k * stride];
            }
            dst[start + i * stride] = (2 * sum + win) / (2 * win);
        }
    };
    for _ in 0..3 {
        for y in 0..h {
            blur_line(&buf, &mut tmp, w, 1, y * w);
        }
        for x in 0..w {
            blur_line(&tmp, &mut buf, h, w, x);
        }
    }
    Coverage { alpha: buf.into_iter().map(|v| v.min(255) as u8).collect(), ..*cov }
}
