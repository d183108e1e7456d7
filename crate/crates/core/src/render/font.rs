//! Glyph sources. The built-in "boxfont" family draws every glyph as a union
//! of axis-aligned bars picked from a 4×5 cell grid; the cell pattern is a
//! bijective scramble of the code point, so glyphs are distinct for every
//! code point below 2^20.

use crate::protocol::Point;

use super::RenderError;

/// Closed contours in glyph-local pixels (origin at the left end of the
/// baseline, y down) plus the horizontal advance.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphOutline {
    pub contours: Vec<Vec<Point>>,
    pub advance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FontMetrics {
    /// Distance from the line top to the baseline.
    pub ascent: f64,
    pub descent: f64,
}

/// Maps `(font, code point, size, italic, bold)` to an outline. Implementations
/// must be deterministic and shareable across threads.
pub trait GlyphSource: Send + Sync {
    fn metrics(&self, font_id: &str, size: f64) -> Result<FontMetrics, RenderError>;

    fn glyph(&self, font_id: &str, ch: char, size: f64, italic: bool, bold: bool)
        -> Result<GlyphOutline, RenderError>;

    fn font_ids(&self) -> Vec<String>;
}

/// Characters that occupy an advance but leave no ink and get no placement.
pub fn is_printable(ch: char) -> bool {
    !ch.is_whitespace() && !ch.is_control()
}

#[derive(Debug, Clone, Copy)]
struct BoxStyle {
    advance: f64,
    ink: f64,
    gap: f64,
}

const COLS: u32 = 4;
const ROWS: u32 = 5;
const CAP: f64 = 0.7;
const ASCENT: f64 = 0.8;
const DESCENT: f64 = 0.2;
const ITALIC_SHEAR: f64 = 0.2;
const BOLD_GROW: f64 = 0.04;

/// The synthetic glyph family. Font ids: `boxfont`, `boxfont-narrow`,
/// `boxfont-wide`, `boxfont-heavy`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoxFont;

pub const BOXFONT_FAMILY: [&str; 4] = ["boxfont", "boxfont-narrow", "boxfont-wide", "boxfont-heavy"];

impl BoxFont {
    fn style(font_id: &str) -> Result<BoxStyle, RenderError> {
        Ok(match font_id {
            "boxfont" => BoxStyle { advance: 0.6, ink: 0.48, gap: 0.035 },
            "boxfont-narrow" => BoxStyle { advance: 0.45, ink: 0.36, gap: 0.03 },
            "boxfont-wide" => BoxStyle { advance: 0.8, ink: 0.68, gap: 0.045 },
            "boxfont-heavy" => BoxStyle { advance: 0.66, ink: 0.56, gap: 0.0 },
            other => return Err(RenderError::FontNotFound(other.to_string())),
        })
    }

    /// 20-bit cell pattern, row-major from the top-left cell.
    pub fn pattern(ch: char) -> u32 {
        const MASK: u32 = (1 << (COLS * ROWS)) - 1;
        // Odd multiplier and xor-shift are both bijections on 20-bit words.
        let mut v = (ch as u32).wrapping_mul(0x9E3B5) & MASK;
        v ^= v >> 7;
        v = v.wrapping_mul(0x5A4C3) & MASK;
        v ^= v >> 11;
        if v == 0 {
            MASK
        } else {
            v
        }
    }
}

impl GlyphSource for BoxFont {
    fn metrics(&self, font_id: &str, size: f64) -> Result<FontMetrics, RenderError> {
        Self::style(font_id)?;
        Ok(FontMetrics { ascent: ASCENT * size, descent: DESCENT * size })
    }

    fn glyph(&self, font_id: &str, ch: char, size: f64, italic: bool, bold: bool) -> Result<GlyphOutline, RenderError> {
        let style = Self::style(font_id)?;
        let grow = if bold { BOLD_GROW * size } else { 0.0 };
        let advance = style.advance * size + 2.0 * grow;
        if !is_printable(ch) {
            let advance = if ch.is_whitespace() && ch != '\n' { advance } else { 0.0 };
            return Ok(GlyphOutline { contours: Vec::new(), advance });
        }

        let pattern = Self::pattern(ch);
        let left = (style.advance - style.ink) / 2.0 * size + grow;
        let cell_w = style.ink * size / f64::from(COLS);
        let cell_h = CAP * size / f64::from(ROWS);
        let gap = style.gap * size;
        let shear = |p: Point| if italic { Point::new(p.x - ITALIC_SHEAR * p.y, p.y) } else { p };

        let mut contours = Vec::new();
        for row in 0..ROWS {
            let top = -CAP * size + f64::from(row) * cell_h;
            let mut col = 0;
            while col < COLS {
                if pattern & (1 << (row * COLS + col)) == 0 {
                    col += 1;
                    continue;
                }
                let start = col;
                while col < COLS && pattern & (1 << (row * COLS + col)) != 0 {
                    col += 1;
                }
                let x0 = left + f64::from(start) * cell_w + gap - grow;
                let x1 = left + f64::from(col) * cell_w - gap + grow;
                let y0 = top + gap;
                let y1 = top + cell_h - gap;
                contours.push(
                    [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
                        .map(shear)
                        .to_vec(),
                );
            }
        }
        Ok(GlyphOutline { contours, advance })
    }

    fn font_ids(&self) -> Vec<String> {
        BOXFONT_FAMILY.iter().map(|s| s.to_string()).collect()
    }
}
