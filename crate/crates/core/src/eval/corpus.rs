//! Seeded synthetic corpus: opaque background, translucent sticker shapes and
//! rendered text, composited exactly as the layer model prescribes.

use std::f64::consts::{PI, TAU};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::protocol::{
    Alignment, Appearance, Bending, ColorSpec, Direction, Geometry, Point, Relational, Rgb, Semantic, ShadowSpec,
    TextInstance, TextProtocol,
};
use crate::raster::{alpha_over, mask_from_alpha, BinaryMask, Raster};
use crate::render::scan::{paint_with_opacity, rasterize};
use crate::render::{render_text_layer, BoxFont, GlyphSource, BOXFONT_FAMILY};

use super::EvalError;

/// Generation knobs; the defaults give 1–5 instances, 20 % curved, up to 6
/// sticker shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusKnobs {
    pub min_instances: usize,
    pub max_instances: usize,
    pub curve_fraction: f64,
    pub max_stickers: usize,
}

impl Default for CorpusKnobs {
    fn default() -> Self {
        Self { min_instances: 1, max_instances: 5, curve_fraction: 0.2, max_stickers: 6 }
    }
}

impl CorpusKnobs {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.min_instances > self.max_instances {
            return Err(EvalError::InvalidArgument("min instances exceeds max instances".into()));
        }
        if !(0.0..=1.0).contains(&self.curve_fraction) {
            return Err(EvalError::InvalidArgument("curve fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub design: Raster,
    pub background: Raster,
    pub sticker: Raster,
    pub text_protocol: TextProtocol,
    pub text_layer: Raster,
    pub text_mask: BinaryMask,
    pub sticker_mask: BinaryMask,
}

impl CorpusItem {
    /// Builds an item from its layers, deriving the composite and masks.
    pub fn assemble(
        id: String,
        background: Raster,
        sticker: Raster,
        text_protocol: TextProtocol,
        text_layer: Raster,
    ) -> Result<Self, EvalError> {
        let design = alpha_over(&text_layer, &alpha_over(&sticker, &background)?)?;
        Ok(Self {
            id,
            text_mask: mask_from_alpha(&text_layer, 0),
            sticker_mask: mask_from_alpha(&sticker, 0),
            design,
            background,
            sticker,
            text_protocol,
            text_layer,
        })
    }
}

pub fn item_id(index: usize) -> String {
    format!("item_{index:05}")
}

const WORDS: [&str; 40] = [
    "SALE", "Grand", "Opening", "FREE", "Coffee", "Summer", "Night", "Market", "50%", "OFF", "New", "Arrival",
    "Jazz", "Festival", "Book", "Club", "Fresh", "Bakery", "Winter", "Deals", "Live", "Music", "Art", "Show",
    "Happy", "Birthday", "Tickets", "Today", "Only", "Menu", "Yoga", "Class", "Vintage", "Store", "2025", "Event",
    "Best", "Price", "Shop", "Now",
];

fn color(rng: &mut ChaCha8Rng) -> Rgb {
    [rng.random(), rng.random(), rng.random()]
}

fn background(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Raster {
    let (a, b) = (color(rng), color(rng));
    if rng.random_bool(0.5) {
        return Raster::filled(w, h, [a[0], a[1], a[2], 255]);
    }
    let angle: f64 = rng.random_range(0.0..TAU);
    let dir = (angle.cos(), -angle.sin());
    let corners = [(0.0, 0.0), (f64::from(w), 0.0), (0.0, f64::from(h)), (f64::from(w), f64::from(h))];
    let proj = corners.map(|(x, y)| x * dir.0 + y * dir.1);
    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let span = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lo;
    let mut img = Raster::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let t = ((f64::from(x) + 0.5) * dir.0 + (f64::from(y) + 0.5) * dir.1 - lo) / span;
            let mix = |i: usize| (f64::from(a[i]) + (f64::from(b[i]) - f64::from(a[i])) * t + 0.5).floor() as u8;
            img.set(x, y, [mix(0), mix(1), mix(2), 255]);
        }
    }
    img
}

fn ellipse(c: Point, rx: f64, ry: f64) -> Vec<Point> {
    (0..64).map(|k| f64::from(k) * TAU / 64.0).map(|t| Point::new(c.x + rx * t.cos(), c.y + ry * t.sin())).collect()
}

fn rounded_rect(x: f64, y: f64, w: f64, h: f64, r: f64) -> Vec<Point> {
    let r = r.min(w / 2.0).min(h / 2.0);
    let corners = [(x + w - r, y + h - r, 0.0), (x + r, y + h - r, 0.5 * PI), (x + r, y + r, PI), (x + w - r, y + r, 1.5 * PI)];
    corners
        .iter()
        .flat_map(|&(cx, cy, start)| {
            (0..=8).map(move |k| {
                let t = start + f64::from(k) * 0.5 * PI / 8.0;
                Point::new(cx + r * t.cos(), cy + r * t.sin())
            })
        })
        .collect()
}

fn stickers(rng: &mut ChaCha8Rng, w: u32, h: u32, max: usize) -> Raster {
    let mut layer = Raster::new(w, h);
    let (fw, fh) = (f64::from(w), f64::from(h));
    for _ in 0..rng.random_range(0..=max) {
        let cx = rng.random_range(0.0..fw);
        let cy = rng.random_range(0.0..fh);
        let sx = rng.random_range(0.05..0.25) * fw;
        let sy = rng.random_range(0.05..0.25) * fh;
        let poly = match rng.random_range(0..3) {
            0 => ellipse(Point::new(cx, cy), sx / 2.0, sx / 2.0),
            1 => vec![
                Point::new(cx - sx / 2.0, cy - sy / 2.0),
                Point::new(cx + sx / 2.0, cy - sy / 2.0),
                Point::new(cx + sx / 2.0, cy + sy / 2.0),
                Point::new(cx - sx / 2.0, cy + sy / 2.0),
            ],
            _ => rounded_rect(cx - sx / 2.0, cy - sy / 2.0, sx, sy, rng.random_range(0.1..0.5) * sx.min(sy)),
        };
        let opacity = if rng.random_bool(0.5) { 255 } else { 128 };
        let c = color(rng);
        paint_with_opacity(&mut layer, &rasterize(&[poly], w, h), opacity, |_, _| c);
    }
    layer
}

fn small_angle(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    let a: f64 = rng.random_range(-max..max);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn color_spec(rng: &mut ChaCha8Rng, gradient_p: f64) -> ColorSpec {
    if rng.random_bool(gradient_p) {
        ColorSpec::LinearGradient { stops: [color(rng), color(rng)], angle: rng.random_range(0.0..TAU) }
    } else {
        ColorSpec::Solid(color(rng))
    }
}

fn text_instance(rng: &mut ChaCha8Rng, glyphs: &dyn GlyphSource, w: u32, h: u32, curve_p: f64, z: i64) -> TextInstance {
    let (fw, fh) = (f64::from(w), f64::from(h));
    let words = rng.random_range(1..=2);
    let text = (0..words).map(|_| *WORDS.choose(rng).expect("nonempty")).collect::<Vec<_>>().join(" ");
    let font_id = BOXFONT_FAMILY.choose(rng).expect("nonempty").to_string();
    let font_size = (rng.random_range(0.03..0.09) * fh).round().max(6.0);
    let bold = rng.random_bool(0.2);
    let char_spacing = (rng.random_range(0.0..2.0f64) * 4.0).round() / 4.0;
    let advance: f64 = text
        .chars()
        .map(|c| glyphs.glyph(&font_id, c, font_size, false, bold).map(|g| g.advance).unwrap_or(0.0) + char_spacing)
        .sum();
    let line_height = [1.0, 1.2, 1.5][rng.random_range(0..3)];
    let bw = (advance * rng.random_range(1.05..1.4)).min(fw * 0.9).ceil();
    let bh = (font_size * line_height * 2.2).ceil();
    let x = rng.random_range(0.0..(fw - bw).max(1.0)).floor();
    let y = rng.random_range(0.0..(fh - bh).max(1.0)).floor();
    let curved = rng.random_bool(curve_p);
    let bending = if curved {
        let sag = rng.random_range(0.3..1.0) * bh * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let base = y + bh / 2.0;
        Bending::curve([
            Point::new(x, base),
            Point::new(x + bw / 3.0, base - sag),
            Point::new(x + 2.0 * bw / 3.0, base - sag),
            Point::new(x + bw, base),
        ])
    } else {
        Bending::straight()
    };
    let stroke = rng.random_bool(0.3);
    let shadow = rng.random_bool(0.2).then(|| ShadowSpec {
        color: color(rng),
        offset_angle: rng.random_range(0.0..TAU),
        offset_distance: rng.random_range(1.0..4.0f64).round(),
        blur_radius: f64::from(rng.random_range(0..=3u8)),
    });
    TextInstance {
        geometry: Geometry {
            x,
            y,
            w: bw,
            h: bh,
            theta: if !curved && rng.random_bool(0.3) { small_angle(rng, 0.3) } else { 0.0 },
            bending,
        },
        semantic: Semantic { text, direction: if rng.random_bool(0.1) { Direction::Rtl } else { Direction::Ltr } },
        appearance: Appearance {
            font_id,
            font_size,
            fill: color_spec(rng, 0.2),
            stroke_width: if stroke { f64::from(rng.random_range(1..=3u8)) } else { 0.0 },
            stroke_color: color_spec(rng, 0.0),
            shadow,
            line_height,
            char_spacing,
            italic: rng.random_bool(0.2),
            bold,
            underline: rng.random_bool(0.15),
        },
        relational: Relational {
            alignment: [Alignment::Left, Alignment::Center, Alignment::Right, Alignment::Justify][rng.random_range(0..4)],
            z_order: z,
        },
    }
}

/// Generates item `index` of the corpus for `seed`; each item draws from its
/// own ChaCha stream, so items are independent of `count` and of each other.
pub fn generate_item(seed: u64, index: usize, (w, h): (u32, u32), knobs: &CorpusKnobs) -> Result<CorpusItem, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let bg = background(&mut rng, w, h);
    let sticker = stickers(&mut rng, w, h, knobs.max_stickers);
    let n = rng.random_range(knobs.min_instances..=knobs.max_instances);
    let mut z: Vec<i64> = (0..n as i64).collect();
    z.shuffle(&mut rng);
    let instances = z.iter().map(|&z| text_instance(&mut rng, &BoxFont, w, h, knobs.curve_fraction, z)).collect();
    let protocol = TextProtocol { canvas_width: w, canvas_height: h, instances };
    let text_layer = render_text_layer(&protocol, &BoxFont)?;
    CorpusItem::assemble(item_id(index), bg, sticker, protocol, text_layer)
}

pub fn generate_corpus(seed: u64, count: usize, size: (u32, u32), knobs: &CorpusKnobs) -> Result<Vec<CorpusItem>, EvalError> {
    if count == 0 {
        return Err(EvalError::InvalidArgument("count must be ≥ 1".into()));
    }
    if size.0 == 0 || size.1 == 0 {
        return Err(EvalError::InvalidArgument("canvas dimensions must be ≥ 1".into()));
    }
    knobs.validate()?;
    (0..count).into_par_iter().map(|i| generate_item(seed, i, size, knobs)).collect()
}
