//! Evaluation metrics (layer IoU, per-layer RGB L1, font and attribute
//! accuracy) and the synthetic corpus they are run against.

mod corpus;
mod disk;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grpo::ProtocolTemplate;
use crate::protocol::{ColorSpec, ProtocolError, Rgb, ShadowSpec, TextInstance, TextProtocol};
use crate::raster::{iou, mask_from_alpha, rgb_l1, BinaryMask, Raster, RasterError};
use crate::render::{render_text_layer, GlyphSource, RenderError, BOXFONT_FAMILY};
use crate::reward::{greedy_match, BBox, RewardContext, RewardError};

pub use corpus::{generate_corpus, generate_item, item_id, CorpusItem, CorpusKnobs};
pub use disk::{read_corpus, read_predictions, write_item, write_prediction, ItemMeta};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("missing prediction for item {0}")]
    MissingPrediction(String),
    #[error("stored design of item {0} does not match its layers")]
    CorruptItem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Tolerances for continuous attributes. Relative ones scale with the
/// ground-truth value; angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttrThresholds {
    pub font_size_rel: f64,
    pub color_per_channel: u8,
    pub stroke_width_abs: f64,
    pub shadow_angle_abs: f64,
    pub shadow_blur_abs: f64,
    pub shadow_distance_abs: f64,
    pub line_height_rel: f64,
    pub char_spacing_abs: f64,
    pub gradient_angle_abs: f64,
}

impl Default for AttrThresholds {
    fn default() -> Self {
        Self {
            font_size_rel: 0.05,
            color_per_channel: 8,
            stroke_width_abs: 1.0,
            shadow_angle_abs: 10.0,
            shadow_blur_abs: 2.0,
            shadow_distance_abs: 1.0,
            line_height_rel: 0.05,
            char_spacing_abs: 0.5,
            gradient_angle_abs: 10.0,
        }
    }
}

impl AttrThresholds {
    pub fn validate(&self) -> Result<(), EvalError> {
        let vals = [
            self.font_size_rel,
            self.stroke_width_abs,
            self.shadow_angle_abs,
            self.shadow_blur_abs,
            self.shadow_distance_abs,
            self.line_height_rel,
            self.char_spacing_abs,
            self.gradient_angle_abs,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EvalError::InvalidArgument("thresholds must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

pub fn layer_iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, EvalError> {
    Ok(iou(pred, gt)?)
}

fn boxes(p: &TextProtocol) -> Vec<BBox> {
    p.instances.iter().map(BBox::of).collect()
}

/// Matched pairs and the denominator `max(|pred|, |gt|)`; `None` when both
/// protocols are empty.
fn matched(pred: &TextProtocol, gt: &TextProtocol) -> Option<(Vec<(usize, usize)>, f64)> {
    let denom = pred.instances.len().max(gt.instances.len());
    (denom > 0).then(|| (greedy_match(&boxes(pred), &boxes(gt)), denom as f64))
}

pub fn font_accuracy(pred: &TextProtocol, gt: &TextProtocol) -> f64 {
    let Some((pairs, denom)) = matched(pred, gt) else { return 1.0 };
    let hits = pairs
        .iter()
        .filter(|(i, j)| pred.instances[*i].appearance.font_id == gt.instances[*j].appearance.font_id)
        .count();
    hits as f64 / denom
}

fn within_rel(pred: f64, gt: f64, rel: f64) -> bool {
    (pred - gt).abs() <= rel * gt.abs()
}

fn rgb_close(a: Rgb, b: Rgb, tol: u8) -> bool {
    a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= tol)
}

fn angle_close_deg(a: f64, b: f64, tol_deg: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d).to_degrees() <= tol_deg
}

fn color_close(a: &ColorSpec, b: &ColorSpec, th: &AttrThresholds) -> bool {
    match (a, b) {
        (ColorSpec::Solid(x), ColorSpec::Solid(y)) => rgb_close(*x, *y, th.color_per_channel),
        (ColorSpec::LinearGradient { stops: s, angle: a }, ColorSpec::LinearGradient { stops: t, angle: b }) => {
            rgb_close(s[0], t[0], th.color_per_channel)
                && rgb_close(s[1], t[1], th.color_per_channel)
                && angle_close_deg(*a, *b, th.gradient_angle_abs)
        }
        _ => false,
    }
}

fn shadow_close(a: &Option<ShadowSpec>, b: &Option<ShadowSpec>, th: &AttrThresholds) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            rgb_close(a.color, b.color, th.color_per_channel)
                && angle_close_deg(a.offset_angle, b.offset_angle, th.shadow_angle_abs)
                && (a.offset_distance - b.offset_distance).abs() <= th.shadow_distance_abs
                && (a.blur_radius - b.blur_radius).abs() <= th.shadow_blur_abs
        }
        _ => false,
    }
}

/// Rank of each instance in its protocol's z-order.
fn z_ranks(p: &TextProtocol) -> Vec<usize> {
    let mut ranks = vec![0; p.instances.len()];
    for (rank, i) in p.z_sorted().into_iter().enumerate() {
        ranks[i] = rank;
    }
    ranks
}

/// Per-field correctness of a matched instance pair, in a fixed field order.
pub fn attr_fields(pred: &TextInstance, gt: &TextInstance, pred_rank: usize, gt_rank: usize, th: &AttrThresholds) -> Vec<(&'static str, bool)> {
    let (a, b) = (&pred.appearance, &gt.appearance);
    vec![
        ("font_size", within_rel(a.font_size, b.font_size, th.font_size_rel)),
        ("fill", color_close(&a.fill, &b.fill, th)),
        ("stroke_width", (a.stroke_width - b.stroke_width).abs() <= th.stroke_width_abs),
        ("stroke_color", color_close(&a.stroke_color, &b.stroke_color, th)),
        ("shadow", shadow_close(&a.shadow, &b.shadow, th)),
        ("line_height", within_rel(a.line_height, b.line_height, th.line_height_rel)),
        ("char_spacing", (a.char_spacing - b.char_spacing).abs() <= th.char_spacing_abs),
        ("italic", a.italic == b.italic),
        ("bold", a.bold == b.bold),
        ("underline", a.underline == b.underline),
        ("alignment", pred.relational.alignment == gt.relational.alignment),
        ("z_rank", pred_rank == gt_rank),
    ]
}

pub fn attr_accuracy(pred: &TextProtocol, gt: &TextProtocol, th: &AttrThresholds) -> f64 {
    let Some((pairs, denom)) = matched(pred, gt) else { return 1.0 };
    let (pr, gr) = (z_ranks(pred), z_ranks(gt));
    let total: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            let fields = attr_fields(&pred.instances[i], &gt.instances[j], pr[i], gr[j], th);
            fields.iter().filter(|(_, ok)| *ok).count() as f64 / fields.len() as f64
        })
        .sum();
    total / denom
}

/// A method's output for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub protocol: TextProtocol,
    pub sticker: Raster,
    pub background: Raster,
}

impl Prediction {
    pub fn ground_truth(item: &CorpusItem) -> Self {
        Self { protocol: item.text_protocol.clone(), sticker: item.sticker.clone(), background: item.background.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub t_iou: f64,
    pub s_iou: f64,
    pub rgb_l1_text: f64,
    pub rgb_l1_sticker: f64,
    pub rgb_l1_bg: f64,
    pub rgb_l1_avg: f64,
    pub font_accuracy: f64,
    pub attr_accuracy: f64,
    /// Set when the predicted protocol could not be rendered; its text layer
    /// is then taken as empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub t_iou: f64,
    pub s_iou: f64,
    pub rgb_l1_text: f64,
    pub rgb_l1_sticker: f64,
    pub rgb_l1_bg: f64,
    pub rgb_l1_avg: f64,
    pub font_accuracy: f64,
    pub attr_accuracy: f64,
    pub thresholds: AttrThresholds,
    pub items: Vec<EvalRow>,
}

impl EvalReport {
    fn aggregate(items: Vec<EvalRow>, thresholds: AttrThresholds) -> Self {
        let mean = |f: fn(&EvalRow) -> f64| items.iter().map(f).sum::<f64>() / items.len().max(1) as f64;
        Self {
            t_iou: mean(|r| r.t_iou),
            s_iou: mean(|r| r.s_iou),
            rgb_l1_text: mean(|r| r.rgb_l1_text),
            rgb_l1_sticker: mean(|r| r.rgb_l1_sticker),
            rgb_l1_bg: mean(|r| r.rgb_l1_bg),
            rgb_l1_avg: mean(|r| r.rgb_l1_avg),
            font_accuracy: mean(|r| r.font_accuracy),
            attr_accuracy: mean(|r| r.attr_accuracy),
            thresholds,
            items,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn eval_item(item: &CorpusItem, pred: &Prediction, th: &AttrThresholds, glyphs: &dyn GlyphSource) -> Result<EvalRow, EvalError> {
    let (w, h) = item.design.dims();
    let (text, render_error) = match render_text_layer(&pred.protocol, glyphs) {
        Ok(t) if t.dims() == (w, h) => (t, None),
        Ok(t) => return Err(RasterError::DimensionMismatch(t.width(), t.height(), w, h).into()),
        Err(e) => (Raster::new(w, h), Some(e.to_string())),
    };
    let (l_text, l_sticker, l_bg) =
        (rgb_l1(&text, &item.text_layer)?, rgb_l1(&pred.sticker, &item.sticker)?, rgb_l1(&pred.background, &item.background)?);
    Ok(EvalRow {
        id: item.id.clone(),
        t_iou: layer_iou(&mask_from_alpha(&text, 0), &item.text_mask)?,
        s_iou: layer_iou(&mask_from_alpha(&pred.sticker, 0), &item.sticker_mask)?,
        rgb_l1_text: l_text,
        rgb_l1_sticker: l_sticker,
        rgb_l1_bg: l_bg,
        rgb_l1_avg: (l_text + l_sticker + l_bg) / 3.0,
        font_accuracy: font_accuracy(&pred.protocol, &item.text_protocol),
        attr_accuracy: attr_accuracy(&pred.protocol, &item.text_protocol, th),
        render_error,
    })
}

/// Scores predictions against every corpus item. Every corpus id must have a
/// prediction; extra predictions are ignored.
pub fn evaluate(
    predictions: &BTreeMap<String, Prediction>,
    corpus: &[CorpusItem],
    th: &AttrThresholds,
    glyphs: &dyn GlyphSource,
) -> Result<EvalReport, EvalError> {
    th.validate()?;
    if let Some(missing) = corpus.iter().find(|i| !predictions.contains_key(&i.id)) {
        return Err(EvalError::MissingPrediction(missing.id.clone()));
    }
    let rows = corpus
        .par_iter()
        .map(|item| eval_item(item, &predictions[&item.id], th, glyphs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::aggregate(rows, th.clone()))
}

/// One toy-policy template and reward context per corpus item. The policy
/// places a single box the size of the item's bottom-most instance; its
/// vocabulary is every instance string in the corpus, its fonts the boxfont
/// family and its sizes that instance's size scaled by 0.75, 1 and 1.25.
pub fn grpo_training_set(items: &[CorpusItem], grid: u32) -> Result<(Vec<ProtocolTemplate>, Vec<RewardContext>), EvalError> {
    if grid == 0 {
        return Err(EvalError::InvalidArgument("grid must be positive".into()));
    }
    let mut vocab: Vec<String> =
        items.iter().flat_map(|i| i.text_protocol.instances.iter().map(|t| t.semantic.text.clone())).collect();
    vocab.sort();
    vocab.dedup();
    let mut templates = Vec::with_capacity(items.len());
    let mut contexts = Vec::with_capacity(items.len());
    for item in items {
        let p = &item.text_protocol;
        let Some(&first) = p.z_sorted().first() else {
            return Err(EvalError::InvalidArgument(format!("item {} has no text instances", item.id)));
        };
        let inst = &p.instances[first];
        let fill = match inst.appearance.fill {
            ColorSpec::Solid(c) => c,
            ColorSpec::LinearGradient { stops, .. } => stops[0],
        };
        let size = inst.appearance.font_size;
        templates.push(ProtocolTemplate {
            canvas_width: p.canvas_width,
            canvas_height: p.canvas_height,
            grid,
            vocab: vocab.clone(),
            fonts: BOXFONT_FAMILY.iter().map(|s| s.to_string()).collect(),
            sizes: [0.75, 1.0, 1.25].iter().map(|k| (k * size).round().max(1.0)).collect(),
            box_w: inst.geometry.w,
            box_h: inst.geometry.h,
            fill,
        });
        contexts.push(RewardContext::from_reference(item.design.clone(), p, &item.text_layer)?);
    }
    Ok((templates, contexts))
}
