//! Glyph placement for one text instance.

use crate::protocol::{Alignment, Direction, Point, TextInstance};

use super::bezier::ArcTable;
use super::font::{is_printable, GlyphSource};
use super::RenderError;

/// One placed glyph. The glyph's local frame (origin on the baseline, y down)
/// maps to the canvas as `origin + R(rotation)·p`, with `rotation` the
/// screen-space angle of the local +x axis (y-down, so positive turns
/// clockwise on screen).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphPlacement {
    pub ch: char,
    pub origin: Point,
    pub rotation: f64,
    pub scale: f64,
    pub advance: f64,
}

impl GlyphPlacement {
    pub fn to_canvas(&self, p: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        let p = p * self.scale;
        if self.rotation == 0.0 {
            return self.origin + p;
        }
        Point::new(self.origin.x + p.x * c - p.y * s, self.origin.y + p.x * s + p.y * c)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayoutRun {
    pub placements: Vec<GlyphPlacement>,
    /// Underline bars as canvas-space polygons.
    pub decorations: Vec<Vec<Point>>,
}

#[derive(Clone, Copy)]
struct Item {
    ch: char,
    advance: f64,
}

/// Underline bar offset below the baseline and its thickness, in font sizes.
const UNDERLINE_OFFSET: f64 = 0.1;
const UNDERLINE_THICKNESS: f64 = 0.05;

pub fn layout_instance(inst: &TextInstance, glyphs: &dyn GlyphSource) -> Result<LayoutRun, RenderError> {
    let a = &inst.appearance;
    let metrics = glyphs.metrics(&a.font_id, a.font_size)?;
    let advance_of = |ch: char| -> Result<f64, RenderError> {
        Ok(glyphs.glyph(&a.font_id, ch, a.font_size, a.italic, a.bold)?.advance)
    };

    if inst.geometry.bending.follow {
        layout_on_curve(inst, &advance_of)
    } else {
        layout_in_box(inst, metrics.ascent, &advance_of)
    }
}

fn line_width(items: &[Item], spacing: f64) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    items.iter().map(|i| i.advance).sum::<f64>() + spacing * (items.len() - 1) as f64
}

/// Greedy word wrap. Words wider than the box are broken between characters.
fn wrap(text: &str, width: f64, spacing: f64, advance_of: &dyn Fn(char) -> Result<f64, RenderError>)
    -> Result<Vec<Vec<Item>>, RenderError> {
    let fits = |items: &[Item]| line_width(items, spacing) <= width + 1e-9;
    let mut lines = Vec::new();
    for para in text.split('\n') {
        let mut line: Vec<Item> = Vec::new();
        for (wi, word) in para.split(' ').enumerate() {
            let word: Vec<Item> =
                word.chars().map(|ch| Ok(Item { ch, advance: advance_of(ch)? })).collect::<Result<_, RenderError>>()?;
            let mut candidate = line.clone();
            if wi > 0 {
                candidate.push(Item { ch: ' ', advance: advance_of(' ')? });
            }
            candidate.extend(word.iter().copied());
            if fits(&candidate) {
                line = candidate;
                continue;
            }
            if !line.is_empty() {
                lines.push(std::mem::take(&mut line));
            }
            // Start the word on a fresh line, splitting it if it still overflows.
            for item in word {
                line.push(item);
                if !fits(&line) && line.len() > 1 {
                    let last = line.pop().unwrap();
                    lines.push(std::mem::replace(&mut line, vec![last]));
                }
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

fn layout_in_box(inst: &TextInstance, ascent: f64, advance_of: &dyn Fn(char) -> Result<f64, RenderError>)
    -> Result<LayoutRun, RenderError> {
    let g = &inst.geometry;
    let a = &inst.appearance;
    let spacing = a.char_spacing;
    let pitch = a.font_size * a.line_height;
    let rtl = inst.semantic.direction == Direction::Rtl;
    let lines = wrap(&inst.semantic.text, g.w, spacing, advance_of)?;
    let n_lines = lines.len();

    let center = g.center();
    let (sin, cos) = g.theta.sin_cos();
    let to_canvas = |lx: f64, ly: f64| -> Point {
        let p = Point::new(g.x + lx, g.y + ly);
        if g.theta == 0.0 {
            return p;
        }
        let d = p - center;
        Point::new(center.x + d.x * cos + d.y * sin, center.y - d.x * sin + d.y * cos)
    };

    let mut run = LayoutRun::default();
    for (li, mut line) in lines.into_iter().enumerate() {
        if rtl {
            line.reverse();
        }
        let lw = line_width(&line, spacing);
        let last = li + 1 == n_lines;
        let spaces = line.iter().filter(|i| i.ch == ' ').count();
        let (mut pen, gap_extra) = match inst.relational.alignment {
            Alignment::Left => (0.0, 0.0),
            Alignment::Right => (g.w - lw, 0.0),
            Alignment::Center => ((g.w - lw) / 2.0, 0.0),
            Alignment::Justify if !last && spaces > 0 => (0.0, (g.w - lw) / spaces as f64),
            Alignment::Justify => (if rtl { g.w - lw } else { 0.0 }, 0.0),
        };
        let baseline = ascent + li as f64 * pitch;
        let line_start = pen;
        for (k, item) in line.iter().enumerate() {
            if is_printable(item.ch) {
                run.placements.push(GlyphPlacement {
                    ch: item.ch,
                    origin: to_canvas(pen, baseline),
                    rotation: -g.theta,
                    scale: 1.0,
                    advance: item.advance,
                });
            }
            pen += item.advance;
            if k + 1 < line.len() {
                pen += spacing;
            }
            if item.ch == ' ' {
                pen += gap_extra;
            }
        }
        if a.underline && !line.is_empty() {
            let y0 = baseline + UNDERLINE_OFFSET * a.font_size;
            let y1 = y0 + UNDERLINE_THICKNESS * a.font_size;
            run.decorations.push(vec![
                to_canvas(line_start, y0),
                to_canvas(pen, y0),
                to_canvas(pen, y1),
                to_canvas(line_start, y1),
            ]);
        }
    }
    Ok(run)
}

fn layout_on_curve(inst: &TextInstance, advance_of: &dyn Fn(char) -> Result<f64, RenderError>)
    -> Result<LayoutRun, RenderError> {
    let a = &inst.appearance;
    let table = ArcTable::new(&inst.geometry.bending)?;
    let mut items: Vec<Item> = inst
        .semantic
        .text
        .chars()
        .map(|ch| if ch == '\n' { ' ' } else { ch })
        .map(|ch| Ok(Item { ch, advance: advance_of(ch)? }))
        .collect::<Result<_, RenderError>>()?;
    if inst.semantic.direction == Direction::Rtl {
        items.reverse();
    }
    let total = line_width(&items, a.char_spacing);
    let length = table.total_length();
    let start = match inst.relational.alignment {
        Alignment::Left => 0.0,
        Alignment::Right => length - total,
        Alignment::Center | Alignment::Justify => (length - total) / 2.0,
    };

    let mut run = LayoutRun::default();
    let mut pen = start;
    for item in &items {
        let (mid, angle) = table.at_length(pen + item.advance / 2.0);
        let dir = Point::new(angle.cos(), angle.sin());
        let placement = GlyphPlacement {
            ch: item.ch,
            origin: mid - dir * (item.advance / 2.0),
            rotation: angle,
            scale: 1.0,
            advance: item.advance,
        };
        if is_printable(item.ch) {
            run.placements.push(placement);
        }
        if a.underline {
            let y0 = UNDERLINE_OFFSET * a.font_size;
            let y1 = y0 + UNDERLINE_THICKNESS * a.font_size;
            run.decorations.push(
                [Point::new(0.0, y0), Point::new(item.advance, y0), Point::new(item.advance, y1), Point::new(0.0, y1)]
                    .map(|p| placement.to_canvas(p))
                    .to_vec(),
            );
        }
        pen += item.advance + a.char_spacing;
    }
    Ok(run)
}
