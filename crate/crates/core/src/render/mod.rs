//! Deterministic render engine: protocol in, RGBA text layer out.
//!
//! Instances are drawn in ascending z-order onto a transparent canvas. Each
//! instance paints its shadow, then its stroke, then its fill. Coverage comes
//! from [`scan::rasterize`]; colors are composited source-over.

pub mod bezier;
pub mod font;
pub mod layout;
pub mod scan;
mod svg;

use crate::protocol::{validate, ColorSpec, Point, Rgb, TextInstance, TextProtocol, Violation};
use crate::raster::Raster;

pub use bezier::{arc_length_param, bezier_point, ArcTable};
pub use font::{BoxFont, FontMetrics, GlyphOutline, GlyphSource, BOXFONT_FAMILY};
pub use layout::{layout_instance, GlyphPlacement, LayoutRun};
pub use scan::Coverage;
pub use svg::layout_svg;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("font not found: {0}")]
    FontNotFound(String),
    #[error("degenerate bending curve (zero length)")]
    DegenerateCurve,
    #[error("invalid protocol: {0:?}")]
    InvalidProtocol(Vec<Violation>),
}

/// Canvas-space outline polygons (glyph ink plus underline bars) of an
/// instance, normalized for union fill.
pub fn instance_outline(inst: &TextInstance, glyphs: &dyn GlyphSource) -> Result<Vec<Vec<Point>>, RenderError> {
    let run = layout_instance(inst, glyphs)?;
    let a = &inst.appearance;
    let mut polys = Vec::new();
    for pl in &run.placements {
        let g = glyphs.glyph(&a.font_id, pl.ch, a.font_size, a.italic, a.bold)?;
        for c in g.contours {
            polys.push(c.into_iter().map(|p| pl.to_canvas(p)).collect());
        }
    }
    polys.extend(run.decorations);
    scan::normalize_orientation(&mut polys);
    Ok(polys)
}

/// Color of a [`ColorSpec`] at pixel `(x, y)`. Gradients run along `angle`
/// (counter-clockwise on screen from +x) across the extent of `region`.
fn color_sampler(spec: ColorSpec, region: &Coverage) -> impl Fn(u32, u32) -> Rgb {
    let (dir, lo, span, stops) = match spec {
        ColorSpec::Solid(c) => ((0.0, 0.0), 0.0, 1.0, [c, c]),
        ColorSpec::LinearGradient { stops, angle } => {
            let dir = (angle.cos(), -angle.sin());
            let (x0, y0) = (f64::from(region.x0), f64::from(region.y0));
            let (x1, y1) = (x0 + f64::from(region.width), y0 + f64::from(region.height));
            let proj = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].map(|(x, y)| x * dir.0 + y * dir.1);
            let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (dir, lo, (hi - lo).max(1e-12), stops)
        }
    };
    move |x, y| {
        if stops[0] == stops[1] {
            return stops[0];
        }
        let (cx, cy) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
        let t = ((cx * dir.0 + cy * dir.1 - lo) / span).clamp(0.0, 1.0);
        let mut out = [0u8; 3];
        for (o, (a, b)) in out.iter_mut().zip(stops[0].iter().zip(stops[1].iter())) {
            let v = f64::from(*a) + (f64::from(*b) - f64::from(*a)) * t;
            *o = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

fn draw_instance(canvas: &mut Raster, inst: &TextInstance, glyphs: &dyn GlyphSource) -> Result<(), RenderError> {
    let (w, h) = canvas.dims();
    let outline = instance_outline(inst, glyphs)?;
    if outline.is_empty() {
        return Ok(());
    }
    let a = &inst.appearance;

    if let Some(shadow) = &a.shadow {
        let (dx, dy) = (
            shadow.offset_distance * shadow.offset_angle.cos(),
            -shadow.offset_distance * shadow.offset_angle.sin(),
        );
        let moved: Vec<Vec<Point>> =
            outline.iter().map(|p| p.iter().map(|q| Point::new(q.x + dx, q.y + dy)).collect()).collect();
        let radius = shadow.blur_radius.round() as u32;
        let cov = scan::rasterize(&moved, w, h).padded(3 * radius, w, h);
        let cov = scan::box_blur(&cov, radius);
        let color = shadow.color;
        scan::paint(canvas, &cov, |_, _| color);
    }

    if a.stroke_width > 0.0 {
        let cov = scan::rasterize(&scan::dilate(&outline, a.stroke_width), w, h);
        let color = color_sampler(a.stroke_color, &cov);
        scan::paint(canvas, &cov, color);
    }

    let cov = scan::rasterize(&outline, w, h);
    let color = color_sampler(a.fill, &cov);
    scan::paint(canvas, &cov, color);
    Ok(())
}

/// Renders the text layer of a protocol.
pub fn render_text_layer(p: &TextProtocol, glyphs: &dyn GlyphSource) -> Result<Raster, RenderError> {
    let violations = validate(p);
    if !violations.is_empty() {
        return Err(RenderError::InvalidProtocol(violations));
    }
    let mut canvas = Raster::new(p.canvas_width, p.canvas_height);
    for i in p.z_sorted() {
        draw_instance(&mut canvas, &p.instances[i], glyphs)?;
    }
    Ok(canvas)
}
