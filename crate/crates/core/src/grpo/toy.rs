use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{softmax, Factor, ImagePolicy, ToyPolicy};
use crate::protocol::{
    Alignment, Appearance, Bending, Direction, Geometry, Relational, Rgb, Semantic, TextInstance, TextProtocol,
};
use crate::raster::{alpha_over, Raster};
use crate::render::{render_text_layer, BoxFont, GlyphSource, BOXFONT_FAMILY};
use crate::reward::{parser_reward, RewardContext, RewardWeights};

pub const TOY_FACTORS: [&str; 5] = ["text", "x", "y", "font", "size"];

/// Everything about a toy protocol that the policy does not choose. The
/// chosen x/y bins place the center of a fixed-size box on a G×G grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTemplate {
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub grid: u32,
    pub vocab: Vec<String>,
    pub fonts: Vec<String>,
    pub sizes: Vec<f64>,
    pub box_w: f64,
    pub box_h: f64,
    pub fill: Rgb,
}

impl ProtocolTemplate {
    fn bin_center(&self, bin: usize, extent: u32) -> f64 {
        (bin as f64 + 0.5) * f64::from(extent) / f64::from(self.grid)
    }

    pub fn factor_labels(&self) -> Vec<(String, Vec<String>)> {
        let bins = |extent| (0..self.grid as usize).map(|b| format!("{}", self.bin_center(b, extent))).collect();
        vec![
            (TOY_FACTORS[0].into(), self.vocab.clone()),
            (TOY_FACTORS[1].into(), bins(self.canvas_width)),
            (TOY_FACTORS[2].into(), bins(self.canvas_height)),
            (TOY_FACTORS[3].into(), self.fonts.clone()),
            (TOY_FACTORS[4].into(), self.sizes.iter().map(|s| s.to_string()).collect()),
        ]
    }

    /// The one-instance protocol for a choice vector (text, x, y, font, size).
    pub fn assemble(&self, choices: &[usize]) -> TextProtocol {
        let cx = self.bin_center(choices[1], self.canvas_width);
        let cy = self.bin_center(choices[2], self.canvas_height);
        let inst = TextInstance {
            geometry: Geometry {
                x: cx - self.box_w / 2.0,
                y: cy - self.box_h / 2.0,
                w: self.box_w,
                h: self.box_h,
                theta: 0.0,
                bending: Bending::straight(),
            },
            semantic: Semantic { text: self.vocab[choices[0]].clone(), direction: Direction::Ltr },
            appearance: Appearance::plain(self.fonts[choices[3]].clone(), self.sizes[choices[4]], self.fill),
            relational: Relational { alignment: Alignment::Center, z_order: 0 },
        };
        TextProtocol { canvas_width: self.canvas_width, canvas_height: self.canvas_height, instances: vec![inst] }
    }

    pub fn num_actions(&self) -> usize {
        self.factor_labels().iter().map(|(_, l)| l.len()).product()
    }

    #[cfg(test)]
    pub(crate) fn small_test() -> Self {
        Self {
            canvas_width: 64,
            canvas_height: 64,
            grid: 4,
            vocab: ["AB", "CD", "EF", "GH", "IJ", "KL"].map(String::from).to_vec(),
            fonts: vec!["boxfont".into(), "boxfont-wide".into()],
            sizes: vec![10.0, 14.0],
            box_w: 40.0,
            box_h: 16.0,
            fill: [240, 240, 240],
        }
    }
}

impl ToyPolicy {
    /// All-zero logits for each template, image ids in order.
    pub fn uniform(templates: &[ProtocolTemplate]) -> Self {
        let images = templates
            .iter()
            .enumerate()
            .map(|(image, t)| ImagePolicy {
                image,
                factors: t.factor_labels().into_iter().map(|(n, l)| Factor::uniform(n, l)).collect(),
            })
            .collect();
        ToyPolicy { images }
    }
}

/// Scores a sampled protocol for an image.
pub trait RewardFn: Sync {
    fn reward(&self, image: usize, choices: &[usize], protocol: &TextProtocol) -> f64;
}

impl<F: Fn(usize, &[usize], &TextProtocol) -> f64 + Sync> RewardFn for F {
    fn reward(&self, image: usize, choices: &[usize], protocol: &TextProtocol) -> f64 {
        self(image, choices, protocol)
    }
}

/// Parser reward memoized per (image, choices): the protocol is a pure
/// function of the choices, so repeated samples are not re-rendered.
pub struct CachedReward {
    contexts: Vec<RewardContext>,
    weights: RewardWeights,
    glyphs: Box<dyn GlyphSource>,
    cache: Mutex<HashMap<(usize, Vec<usize>), f64>>,
}

impl CachedReward {
    pub fn new(contexts: Vec<RewardContext>, weights: RewardWeights, glyphs: Box<dyn GlyphSource>) -> Self {
        Self { contexts, weights, glyphs, cache: Mutex::new(HashMap::new()) }
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("reward cache poisoned").len()
    }
}

impl RewardFn for CachedReward {
    fn reward(&self, image: usize, choices: &[usize], protocol: &TextProtocol) -> f64 {
        let key = (image, choices.to_vec());
        if let Some(r) = self.cache.lock().expect("reward cache poisoned").get(&key) {
            return *r;
        }
        // A dimension mismatch is a malformed candidate like any other: reward 0.
        let r = parser_reward(protocol, &self.contexts[image], self.weights, self.glyphs.as_ref())
            .map(|b| b.total)
            .unwrap_or(0.0);
        self.cache.lock().expect("reward cache poisoned").insert(key, r);
        r
    }
}

/// Exact expected reward of an image's policy at sampling temperature `τ`,
/// by enumerating the full factor product.
pub fn expected_reward(policy: &ToyPolicy, template: &ProtocolTemplate, image: usize, temperature: f64, reward: &dyn RewardFn) -> f64 {
    let probs: Vec<Vec<f64>> = policy.images[image].factors.iter().map(|f| softmax(&f.logits, temperature)).collect();
    let sizes: Vec<usize> = probs.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    let decode = |mut idx: usize| {
        let mut c = vec![0; sizes.len()];
        for (ci, n) in c.iter_mut().zip(&sizes).rev() {
            *ci = idx % n;
            idx /= n;
        }
        c
    };
    let terms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let c = decode(idx);
            let p: f64 = c.iter().zip(&probs).map(|(&ci, pf)| pf[ci]).product();
            if p == 0.0 {
                0.0
            } else {
                p * reward.reward(image, &c, &template.assemble(&c))
            }
        })
        .collect();
    terms.iter().sum()
}

/// A single-image task with known ground truth.
pub struct ToyTask {
    pub template: ProtocolTemplate,
    pub ground_truth: Vec<usize>,
    pub gt_protocol: TextProtocol,
    pub context: RewardContext,
}

const WORDS: [&str; 24] = [
    "SALE", "OPEN", "NEW", "FREE", "SHOP", "CAFE", "MENU", "HOT", "DEAL", "GIFT", "BOOK", "JAZZ", "TOUR", "WIN",
    "FUN", "ART", "MAX", "ZEN", "YES", "GO", "SUN", "SKY", "TEA", "LUX",
];

/// Toy task: 128×128 canvas, 8-word vocabulary containing the ground-truth
/// string, 8×8 position grid, the 4 boxfont ids and 3 size bins; the
/// ground-truth instance sits on a bin center over a solid background.
pub fn toy_task(seed: u64) -> ToyTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = WORDS.to_vec();
    words.shuffle(&mut rng);
    let template = ProtocolTemplate {
        canvas_width: 128,
        canvas_height: 128,
        grid: 8,
        vocab: words[..8].iter().map(|s| s.to_string()).collect(),
        fonts: BOXFONT_FAMILY.iter().map(|s| s.to_string()).collect(),
        sizes: vec![12.0, 16.0, 20.0],
        box_w: 96.0,
        box_h: 24.0,
        fill: [rng.random_range(200..=255), rng.random_range(200..=255), rng.random_range(200..=255)],
    };
    let ground_truth = vec![
        rng.random_range(0..8),
        rng.random_range(2..6),
        rng.random_range(1..7),
        rng.random_range(0..4),
        rng.random_range(0..3),
    ];
    let gt_protocol = template.assemble(&ground_truth);
    let bg = Raster::filled(128, 128, [rng.random_range(0..80), rng.random_range(0..80), rng.random_range(0..80), 255]);
    let layer = render_text_layer(&gt_protocol, &BoxFont).expect("toy protocol renders");
    let design = alpha_over(&layer, &bg).expect("same size");
    let context = RewardContext::from_reference(design, &gt_protocol, &layer).expect("same size");
    ToyTask { template, ground_truth, gt_protocol, context }
}
