//! Renderer-grounded reward: pixel fidelity, localization and string
//! similarity, combined with normalized weights.

mod matching;

use serde::Serialize;

use crate::protocol::{TextInstance, TextProtocol};
use crate::raster::{iou, mask_from_alpha, masked_l1, BinaryMask, Raster, RasterError};
use crate::render::{render_text_layer, GlyphSource};

pub use matching::{greedy_match, BBox};

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Normalized weights; the three components always sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub lambda_pix: f64,
    pub lambda_loc: f64,
    pub lambda_sem: f64,
}

impl RewardWeights {
    pub fn new(pix: f64, loc: f64, sem: f64) -> Result<Self, RewardError> {
        let raw = [pix, loc, sem];
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RewardError::InvalidWeights(format!("weights must be finite and nonnegative, got {raw:?}")));
        }
        let sum = pix + loc + sem;
        if sum <= 0.0 {
            return Err(RewardError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Self { lambda_pix: pix / sum, lambda_loc: loc / sum, lambda_sem: sem / sum })
    }

    pub fn equal() -> Self {
        Self::new(1.0, 1.0, 1.0).expect("equal weights are valid")
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda_pix, self.lambda_loc, self.lambda_sem]
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::equal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_pix: f64,
    pub r_loc: f64,
    pub r_sem: f64,
    pub total: f64,
    #[serde(serialize_with = "ser_weights")]
    pub weights: RewardWeights,
    /// Set when the candidate could not be rendered and was scored 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn ser_weights<S: serde::Serializer>(w: &RewardWeights, s: S) -> Result<S::Ok, S::Error> {
    w.as_array().serialize(s)
}

impl RewardBreakdown {
    fn combine(r_pix: f64, r_loc: f64, r_sem: f64, weights: RewardWeights) -> Self {
        let total = weights.lambda_pix * r_pix + weights.lambda_loc * r_loc + weights.lambda_sem * r_sem;
        Self { r_pix, r_loc, r_sem, total: total.clamp(0.0, 1.0), weights, note: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("breakdown serializes")
    }
}

/// What the reward compares against: the input design, the reference text
/// mask, and the reference strings with their boxes.
#[derive(Debug, Clone)]
pub struct RewardContext {
    pub input: Raster,
    pub reference_mask: BinaryMask,
    pub reference_texts: Vec<(String, BBox)>,
}

impl RewardContext {
    pub fn new(input: Raster, reference_mask: BinaryMask, reference_texts: Vec<(String, BBox)>) -> Result<Self, RewardError> {
        let (w, h) = input.dims();
        let (mw, mh) = reference_mask.dims();
        if (w, h) != (mw, mh) {
            return Err(RasterError::DimensionMismatch(w, h, mw, mh).into());
        }
        Ok(Self { input, reference_mask, reference_texts })
    }

    /// Context from a reference protocol and its rendered text layer.
    pub fn from_reference(input: Raster, reference: &TextProtocol, text_layer: &Raster) -> Result<Self, RewardError> {
        let texts = reference.instances.iter().map(|i| (i.semantic.text.clone(), BBox::of(i))).collect();
        Self::new(input, mask_from_alpha(text_layer, 0), texts)
    }
}

/// `1 − Lev(a, b) / max(|a|, |b|)` over Unicode scalar values.
pub fn levenshtein_sim(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Alpha above which a rendered pixel counts toward the pixel term.
///
/// Partially covered pixels blend the text color with whatever lies beneath it
/// in the design, which the text layer alone cannot reproduce; only fully
/// opaque pixels can match the input exactly.
pub const PIX_ALPHA_THRESHOLD: u8 = 254;

/// The fully opaque part of a rendered layer, everything else transparent.
pub fn opaque_part(rendered: &Raster) -> Raster {
    let mut out = rendered.clone();
    for p in out.pixels_mut() {
        if p[3] <= PIX_ALPHA_THRESHOLD {
            *p = [0, 0, 0, 0];
        }
    }
    out
}

pub fn r_pix(ctx: &RewardContext, rendered: &Raster) -> Result<f64, RewardError> {
    let mask = mask_from_alpha(rendered, PIX_ALPHA_THRESHOLD);
    Ok((-masked_l1(&ctx.input, &opaque_part(rendered), &mask)?).exp())
}

pub fn r_loc(ctx: &RewardContext, rendered: &Raster) -> Result<f64, RewardError> {
    Ok(iou(&mask_from_alpha(rendered, 0), &ctx.reference_mask)?)
}

pub fn r_sem(pred: &TextProtocol, ctx: &RewardContext) -> f64 {
    let pred_items: Vec<(&str, BBox)> = pred.instances.iter().map(|i| (i.semantic.text.as_str(), BBox::of(i))).collect();
    let ref_items: Vec<(&str, BBox)> = ctx.reference_texts.iter().map(|(s, b)| (s.as_str(), *b)).collect();
    string_score(&pred_items, &ref_items)
}

/// Length-weighted string similarity over a greedy box matching; unmatched
/// strings on either side score 0 with weight `max(len, 1)`.
pub fn string_score(pred: &[(&str, BBox)], reference: &[(&str, BBox)]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let len = |s: &str| s.chars().count().max(1) as f64;
    let pairs = greedy_match(
        &pred.iter().map(|p| p.1).collect::<Vec<_>>(),
        &reference.iter().map(|r| r.1).collect::<Vec<_>>(),
    );
    let (mut num, mut den) = (0.0, 0.0);
    let (mut pred_used, mut ref_used) = (vec![false; pred.len()], vec![false; reference.len()]);
    for &(i, j) in &pairs {
        let (a, b) = (pred[i].0, reference[j].0);
        let w = len(a).max(len(b));
        num += w * levenshtein_sim(a, b);
        den += w;
        pred_used[i] = true;
        ref_used[j] = true;
    }
    for (s, _) in pred.iter().zip(&pred_used).filter(|(_, u)| !**u).map(|(p, _)| *p) {
        den += len(s);
    }
    for (s, _) in reference.iter().zip(&ref_used).filter(|(_, u)| !**u).map(|(r, _)| *r) {
        den += len(s);
    }
    num / den
}

/// Renders `pred` and scores it. A candidate that cannot be rendered (bad
/// font, invalid geometry) scores 0 with a note instead of failing, so a
/// sampling group always has a full set of rewards.
pub fn parser_reward(
    pred: &TextProtocol,
    ctx: &RewardContext,
    weights: RewardWeights,
    glyphs: &dyn GlyphSource,
) -> Result<RewardBreakdown, RewardError> {
    let (w, h) = ctx.input.dims();
    if (pred.canvas_width, pred.canvas_height) != (w, h) {
        return Err(RasterError::DimensionMismatch(pred.canvas_width, pred.canvas_height, w, h).into());
    }
    let rendered = match render_text_layer(pred, glyphs) {
        Ok(r) => r,
        Err(e) => {
            let mut b = RewardBreakdown::combine(0.0, 0.0, 0.0, weights);
            b.note = Some(format!("unrenderable: {e}"));
            return Ok(b);
        }
    };
    Ok(RewardBreakdown::combine(r_pix(ctx, &rendered)?, r_loc(ctx, &rendered)?, r_sem(pred, ctx), weights))
}

impl BBox {
    pub fn of(inst: &TextInstance) -> Self {
        let g = &inst.geometry;
        BBox { x: g.x, y: g.y, w: g.w, h: g.h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fixtures::instance;
    use crate::render::BoxFont;
    use proptest::prelude::*;

    fn dp_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein_sim("abc", "abc"), 1.0);
        assert_eq!(levenshtein_sim("", ""), 1.0);
        assert_eq!(levenshtein_sim("kitten", "sitting"), 1.0 - 3.0 / 7.0);
        assert_eq!(levenshtein_sim("SALE", "SALE!"), 1.0 - 1.0 / 5.0);
        assert_eq!(levenshtein_sim("", "abc"), 0.0);
        // Scalar values, not bytes.
        assert_eq!(levenshtein_sim("é", "e"), 0.0);
        assert_eq!(levenshtein_sim("日本", "日本語"), 1.0 - 1.0 / 3.0);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_dp(a in "[abc日]{0,12}", b in "[abc日]{0,12}") {
            let d = levenshtein(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>());
            prop_assert_eq!(d, dp_oracle(&a, &b));
            prop_assert_eq!(levenshtein_sim(&a, &b), levenshtein_sim(&b, &a));
            prop_assert_eq!(levenshtein_sim(&a, &b) == 1.0, a == b);
        }
    }

    #[test]
    fn weights_normalize_and_reject() {
        let w = RewardWeights::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(w.as_array(), [1.0 / 3.0; 3]);
        assert_eq!(RewardWeights::new(0.0, 2.0, 2.0).unwrap().as_array(), [0.0, 0.5, 0.5]);
        assert!(RewardWeights::new(-1.0, 1.0, 1.0).is_err());
        assert!(RewardWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(RewardWeights::new(f64::NAN, 1.0, 1.0).is_err());
    }

    fn ctx_for(p: &TextProtocol) -> RewardContext {
        let layer = render_text_layer(p, &BoxFont).unwrap();
        let bg = Raster::filled(p.canvas_width, p.canvas_height, [30, 60, 90, 255]);
        let input = crate::raster::alpha_over(&layer, &bg).unwrap();
        RewardContext::from_reference(input, p, &layer).unwrap()
    }

    #[test]
    fn r_sem_examples() {
        let one = |s: &str| TextProtocol { canvas_width: 100, canvas_height: 100, instances: vec![instance(s, 0.0, 0.0, 0)] };
        let ctx = RewardContext::new(
            Raster::new(100, 100),
            BinaryMask::new(100, 100),
            vec![("SALE".into(), BBox { x: 0.0, y: 0.0, w: 120.0, h: 30.0 })],
        )
        .unwrap();
        assert_eq!(r_sem(&one("SALE"), &ctx), 1.0);
        assert_eq!(r_sem(&one("SALE!"), &ctx), 0.8);
        let mut two = one("SALE");
        two.instances.push(instance("FREE", 0.0, 50.0, 1));
        assert_eq!(r_sem(&two, &ctx), 0.5);
        // Missing instance is penalized like a hallucinated one.
        assert_eq!(r_sem(&TextProtocol::empty(100, 100), &ctx), 0.0);
        let empty_ctx = RewardContext::new(Raster::new(100, 100), BinaryMask::new(100, 100), vec![]).unwrap();
        assert_eq!(r_sem(&TextProtocol::empty(100, 100), &empty_ctx), 1.0);
    }

    #[test]
    fn ground_truth_scores_one() {
        let p = TextProtocol {
            canvas_width: 200,
            canvas_height: 120,
            instances: vec![instance("Hello World", 10.0, 10.0, 0), instance("12%", 60.0, 70.5, 1)],
        };
        let b = parser_reward(&p, &ctx_for(&p), RewardWeights::equal(), &BoxFont).unwrap();
        assert_eq!((b.r_pix, b.r_loc, b.r_sem), (1.0, 1.0, 1.0));
        assert!((b.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_text_and_position_score_less() {
        let gt = TextProtocol { canvas_width: 200, canvas_height: 120, instances: vec![instance("OPEN", 10.0, 10.0, 0)] };
        let ctx = ctx_for(&gt);
        let mut moved = gt.clone();
        moved.instances[0].geometry.x += 40.0;
        let b = parser_reward(&moved, &ctx, RewardWeights::equal(), &BoxFont).unwrap();
        assert!(b.r_loc < 1.0 && b.r_pix < 1.0 && b.r_sem == 1.0);
        let mut typo = gt.clone();
        typo.instances[0].semantic.text = "OPEM".into();
        let b = parser_reward(&typo, &ctx, RewardWeights::equal(), &BoxFont).unwrap();
        assert_eq!(b.r_sem, 0.75);
        assert!(b.total < 1.0);
    }

    #[test]
    fn unrenderable_scores_zero_with_note() {
        let gt = TextProtocol { canvas_width: 200, canvas_height: 120, instances: vec![instance("OPEN", 10.0, 10.0, 0)] };
        let ctx = ctx_for(&gt);
        let mut bad = gt.clone();
        bad.instances[0].appearance.font_id = "nope".into();
        let b = parser_reward(&bad, &ctx, RewardWeights::equal(), &BoxFont).unwrap();
        assert_eq!(b.total, 0.0);
        assert!(b.note.unwrap().contains("nope"));
        let wrong_size = TextProtocol::empty(10, 10);
        assert!(matches!(parser_reward(&wrong_size, &ctx, RewardWeights::equal(), &BoxFont), Err(RewardError::Raster(_))));
    }

    #[test]
    fn uniform_in_mask_difference() {
        // Opaque layer of 25/255 and 26/255 gray against black input.
        let layer = Raster::from_pixels(2, 1, vec![[25, 25, 25, 255], [26, 26, 26, 255]]).unwrap();
        let ctx = RewardContext::new(Raster::filled(2, 1, [0, 0, 0, 255]), BinaryMask::new(2, 1), vec![]).unwrap();
        let expect = (-(3.0 * 25.0 / 255.0 + 3.0 * 26.0 / 255.0) / (6.0 + 1e-8_f64)).exp();
        assert!((r_pix(&ctx, &layer).unwrap() - expect).abs() < 1e-15);
        assert!((expect - (-0.1f64).exp()).abs() < 1e-8);
        assert_eq!(r_loc(&ctx, &layer).unwrap(), 0.0);
        assert_eq!(r_pix(&ctx, &Raster::new(2, 1)).unwrap(), 1.0);
    }

    #[test]
    fn r_loc_half_overlap() {
        let mut refm = BinaryMask::new(4, 1);
        refm.fill_rect(0, 0, 2, 1);
        let ctx = RewardContext::new(Raster::new(4, 1), refm, vec![]).unwrap();
        let mut layer = Raster::new(4, 1);
        layer.set(1, 0, [9, 9, 9, 255]);
        layer.set(2, 0, [9, 9, 9, 255]);
        assert_eq!(r_loc(&ctx, &layer).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn breakdown_json_shape() {
        let b = RewardBreakdown::combine(1.0, 0.5, 0.25, RewardWeights::new(2.0, 1.0, 1.0).unwrap());
        let v: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
        assert_eq!(v["weights"], serde_json::json!([0.5, 0.25, 0.25]));
        assert_eq!(v["total"], 0.5 + 0.125 + 0.0625);
        assert!(v.get("note").is_none());
    }

    proptest! {
        #[test]
        fn r_loc_monotone_when_adding_reference_pixels(
            refbits in proptest::collection::vec(any::<bool>(), 36),
            predbits in proptest::collection::vec(any::<bool>(), 36),
            add in 0usize..36,
        ) {
            let refm = BinaryMask::from_bits(6, 6, refbits.clone()).unwrap();
            let ctx = RewardContext::new(Raster::new(6, 6), refm, vec![]).unwrap();
            let layer = |bits: &[bool]| Raster::from_pixels(6, 6, bits.iter().map(|b| if *b { [1, 1, 1, 255] } else { [0; 4] }).collect()).unwrap();
            let before = r_loc(&ctx, &layer(&predbits)).unwrap();
            let mut grown = predbits.clone();
            for (i, bit) in refbits.iter().enumerate().skip(add) {
                if *bit { grown[i] = true; }
            }
            prop_assert!(r_loc(&ctx, &layer(&grown)).unwrap() >= before);
        }
    }
}
