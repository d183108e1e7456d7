//! Group Relative Policy Optimization over a factorized categorical policy.
//!
//! Each image owns a set of independent categorical factors (text, x bin,
//! y bin, font, size bin); a sample picks one category per factor and the
//! [`ProtocolTemplate`] turns the picks into a one-instance protocol.
//! Gradients are analytic: for a factor with logits `z`, probabilities `p`
//! and pick `c`, `∂ log p_c / ∂ z = onehot(c) − p`.

mod toy;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::protocol::TextProtocol;

pub use toy::{expected_reward, toy_task, CachedReward, ProtocolTemplate, RewardFn, ToyTask, TOY_FACTORS};

#[derive(Debug, thiserror::Error)]
pub enum GrpoError {
    #[error("policy structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub labels: Vec<String>,
    pub logits: Vec<f64>,
}

impl Factor {
    pub fn uniform(name: impl Into<String>, labels: Vec<String>) -> Self {
        let logits = vec![0.0; labels.len()];
        Self { name: name.into(), labels, logits }
    }

    pub fn probs(&self) -> Vec<f64> {
        softmax(&self.logits, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePolicy {
    pub image: usize,
    pub factors: Vec<Factor>,
}

/// Policy parameters θ: one factor set per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub images: Vec<ImagePolicy>,
}

impl ToyPolicy {
    pub fn validate(&self) -> Result<(), GrpoError> {
        for img in &self.images {
            for f in &img.factors {
                if f.logits.len() < 2 || f.labels.len() != f.logits.len() {
                    return Err(GrpoError::InvalidPolicy(format!(
                        "image {} factor {:?}: needs ≥ 2 categories with one label each",
                        img.image, f.name
                    )));
                }
                if f.logits.iter().any(|z| !z.is_finite()) {
                    return Err(GrpoError::InvalidPolicy(format!("image {} factor {:?}: non-finite logit", img.image, f.name)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GrpoError> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    fn same_structure(&self, other: &ToyPolicy) -> Result<(), GrpoError> {
        let mismatch = |m: String| Err(GrpoError::StructureMismatch(m));
        if self.images.len() != other.images.len() {
            return mismatch(format!("{} vs {} images", self.images.len(), other.images.len()));
        }
        for (a, b) in self.images.iter().zip(&other.images) {
            if a.factors.len() != b.factors.len() {
                return mismatch(format!("image {}: {} vs {} factors", a.image, a.factors.len(), b.factors.len()));
            }
            for (fa, fb) in a.factors.iter().zip(&b.factors) {
                if fa.name != fb.name || fa.logits.len() != fb.logits.len() {
                    return mismatch(format!("image {}: factor {:?} differs", a.image, fa.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub learning_rate: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    pub clip: f64,
    pub kl_beta: f64,
    pub temperature: f64,
    pub eps_adv: f64,
    pub inner_epochs: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 16,
            learning_rate: 1e-4,
            total_steps: 2000,
            batch_size: 32,
            clip: 0.2,
            kl_beta: 0.01,
            temperature: 0.8,
            eps_adv: 1e-8,
            inner_epochs: 1,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.into()));
        if self.group_size == 0 {
            return bad("group size must be ≥ 1");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be > 0");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be > 0");
        }
        if self.batch_size == 0 || self.inner_epochs == 0 {
            return bad("batch size and inner epochs must be ≥ 1");
        }
        if !self.learning_rate.is_finite() || !self.kl_beta.is_finite() || self.kl_beta < 0.0 {
            return bad("learning rate must be finite and kl beta finite and ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub choices: Vec<usize>,
    pub protocol: TextProtocol,
    /// Log-probability under the policy being optimized (temperature 1).
    pub logp: f64,
    /// Log-probability under the rollout snapshot θ_old.
    pub logp_old: f64,
    pub reward: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGroup {
    pub image: usize,
    pub samples: Vec<Sample>,
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| ((z - max) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Inverse-CDF draw; always consumes exactly one uniform so that runs with
/// different parameters see common random numbers.
fn draw(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn log_prob(img: &ImagePolicy, choices: &[usize]) -> f64 {
    img.factors.iter().zip(choices).map(|(f, &c)| log_softmax(&f.logits)[c]).sum()
}

/// Draws K protocols from `softmax(logits / τ)`; log-probs use τ = 1.
/// Rewards and advantages are left at 0.
pub fn sample_group(
    policy: &ToyPolicy,
    template: &ProtocolTemplate,
    image: usize,
    cfg: &GrpoConfig,
    rng: &mut impl Rng,
) -> PolicyGroup {
    let img = &policy.images[image];
    let tempered: Vec<Vec<f64>> = img.factors.iter().map(|f| softmax(&f.logits, cfg.temperature)).collect();
    let samples = (0..cfg.group_size)
        .map(|_| {
            let choices: Vec<usize> = tempered.iter().map(|p| draw(p, rng)).collect();
            let logp = log_prob(img, &choices);
            Sample {
                protocol: template.assemble(&choices),
                choices,
                logp,
                logp_old: logp,
                reward: 0.0,
                advantage: 0.0,
            }
        })
        .collect();
    PolicyGroup { image, samples }
}

/// `(r − μ) / (σ + ε)` with the population standard deviation. The mean is
/// taken relative to the first reward so a constant group has μ equal to
/// that constant exactly, and hence all-zero advantages.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Vec<f64> {
    let Some(&r0) = rewards.first() else { return Vec::new() };
    let k = rewards.len() as f64;
    let mu = r0 + rewards.iter().map(|r| r - r0).sum::<f64>() / k;
    let var = rewards.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / k;
    let sigma = var.sqrt();
    rewards.iter().map(|r| (r - mu) / (sigma + eps)).collect()
}

/// `min(ρ·A, clip(ρ, 1 − ε, 1 + ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

fn categorical_kl(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    let (lp, lq) = (log_softmax(p_logits), log_softmax(q_logits));
    lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum::<f64>().max(0.0)
}

fn image_kl(a: &ImagePolicy, b: &ImagePolicy) -> f64 {
    a.factors.iter().zip(&b.factors).map(|(f, g)| categorical_kl(&f.logits, &g.logits)).sum()
}

/// `KL(π_θ ‖ π_ref)` summed over every factor of every image.
pub fn kl_to_reference(policy: &ToyPolicy, reference: &ToyPolicy) -> Result<f64, GrpoError> {
    policy.same_structure(reference)?;
    Ok(policy.images.iter().zip(&reference.images).map(|(a, b)| image_kl(a, b)).sum())
}

/// Per-image, per-factor logit gradients, same layout as the policy.
pub type Gradient = Vec<Vec<Vec<f64>>>;

pub fn zero_gradient(policy: &ToyPolicy) -> Gradient {
    policy.images.iter().map(|i| i.factors.iter().map(|f| vec![0.0; f.logits.len()]).collect()).collect()
}

/// Loss `−(1/|batch|) Σ_groups Σ_k surrogate_k + β·(1/|batch|) Σ_batch KL_image`
/// at the current policy, for groups whose rollout snapshot is recorded in
/// `logp_old`. Returns (loss, gradient, number of clipped ratios).
pub fn loss_and_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    groups: &[PolicyGroup],
    cfg: &GrpoConfig,
) -> (f64, Gradient, usize) {
    let mut grad = zero_gradient(policy);
    let scale = 1.0 / groups.len() as f64;
    let mut loss = 0.0;
    let mut clipped = 0;
    for g in groups {
        let img = &policy.images[g.image];
        let probs: Vec<Vec<f64>> = img.factors.iter().map(Factor::probs).collect();
        for s in &g.samples {
            let logp = log_prob(img, &s.choices);
            let ratio = (logp - s.logp_old).exp();
            let a = s.advantage;
            loss -= scale * clipped_surrogate(ratio, a, cfg.clip);
            if ratio < 1.0 - cfg.clip || ratio > 1.0 + cfg.clip {
                clipped += 1;
            }
            // The unclipped branch carries the gradient whenever it attains the min.
            if ratio * a <= ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a {
                let coef = -scale * a * ratio;
                for ((gf, p), &c) in grad[g.image].iter_mut().zip(&probs).zip(&s.choices) {
                    for (j, (gj, pj)) in gf.iter_mut().zip(p).enumerate() {
                        *gj += coef * (f64::from(u8::from(j == c)) - pj);
                    }
                }
            }
        }
        if cfg.kl_beta != 0.0 {
            let refimg = &reference.images[g.image];
            for (fi, (f, r)) in img.factors.iter().zip(&refimg.factors).enumerate() {
                let (lp, lq) = (log_softmax(&f.logits), log_softmax(&r.logits));
                let kl = categorical_kl(&f.logits, &r.logits);
                loss += scale * cfg.kl_beta * kl;
                for (j, gj) in grad[g.image][fi].iter_mut().enumerate() {
                    *gj += scale * cfg.kl_beta * lp[j].exp() * (lp[j] - lq[j] - kl);
                }
            }
        }
    }
    (loss, grad, clipped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStats {
    pub step: usize,
    pub mean_reward: f64,
    #[serde(skip)]
    pub mean_abs_advantage: f64,
    pub kl: f64,
    pub clip_frac: f64,
}

/// Samples and scores one group per batch image, then takes `inner_epochs`
/// gradient-descent steps against the rollout snapshot.
pub fn grpo_step(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    templates: &[ProtocolTemplate],
    batch: &[usize],
    cfg: &GrpoConfig,
    reward: &dyn RewardFn,
    rng: &mut ChaCha8Rng,
) -> Result<(ToyPolicy, StepStats), GrpoError> {
    if batch.is_empty() {
        return Err(GrpoError::EmptyCorpus);
    }
    let mut groups: Vec<PolicyGroup> = batch.iter().map(|&i| sample_group(policy, &templates[i], i, cfg, rng)).collect();
    for g in &mut groups {
        let image = g.image;
        let rewards: Vec<f64> =
            g.samples.par_iter().map(|s| reward.reward(image, &s.choices, &s.protocol)).collect();
        for (s, (r, a)) in g.samples.iter_mut().zip(rewards.iter().zip(group_advantages(&rewards, cfg.eps_adv))) {
            s.reward = *r;
            s.advantage = a;
        }
    }

    let mut theta = policy.clone();
    let mut clipped = 0;
    for _ in 0..cfg.inner_epochs {
        let (_, grad, c) = loss_and_grad(&theta, reference, &groups, cfg);
        clipped += c;
        for (img, gi) in theta.images.iter_mut().zip(&grad) {
            for (f, gf) in img.factors.iter_mut().zip(gi) {
                for (z, g) in f.logits.iter_mut().zip(gf) {
                    *z -= cfg.learning_rate * g;
                }
            }
        }
    }

    let n = groups.iter().map(|g| g.samples.len()).sum::<usize>() as f64;
    let stats = StepStats {
        step: 0,
        mean_reward: groups.iter().flat_map(|g| &g.samples).map(|s| s.reward).sum::<f64>() / n,
        mean_abs_advantage: groups.iter().flat_map(|g| &g.samples).map(|s| s.advantage.abs()).sum::<f64>() / n,
        kl: kl_to_reference(&theta, reference)?,
        clip_frac: clipped as f64 / (n * cfg.inner_epochs as f64),
    };
    Ok((theta, stats))
}

/// Runs `total_steps` GRPO steps from `initial`, which also serves as the KL
/// reference. Each step draws `min(B, |corpus|)` distinct images. When `log`
/// is given, one JSON line per step is written to it.
pub fn train(
    initial: &ToyPolicy,
    templates: &[ProtocolTemplate],
    cfg: &GrpoConfig,
    reward: &dyn RewardFn,
    mut log: Option<&mut dyn Write>,
) -> Result<(ToyPolicy, Vec<StepStats>), GrpoError> {
    cfg.validate()?;
    initial.validate()?;
    if templates.is_empty() || initial.images.is_empty() {
        return Err(GrpoError::EmptyCorpus);
    }
    if templates.len() != initial.images.len() {
        return Err(GrpoError::StructureMismatch(format!(
            "{} templates for {} policy images",
            templates.len(),
            initial.images.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = templates.len();
    let b = cfg.batch_size.min(n);
    let mut policy = initial.clone();
    let mut history = Vec::with_capacity(cfg.total_steps);
    for step in 0..cfg.total_steps {
        let mut batch = rand::seq::index::sample(&mut rng, n, b).into_vec();
        batch.sort_unstable();
        let (next, mut stats) = grpo_step(&policy, initial, templates, &batch, cfg, reward, &mut rng)?;
        stats.step = step;
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &stats)?;
            w.write_all(b"\n")?;
        }
        policy = next;
        history.push(stats);
    }
    Ok((policy, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn tiny_policy(seed: u64) -> ToyPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factor = |name: &str, n: usize, rng: &mut ChaCha8Rng| Factor {
            name: name.into(),
            labels: (0..n).map(|i| i.to_string()).collect(),
            logits: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        ToyPolicy {
            images: (0..2)
                .map(|image| ImagePolicy {
                    image,
                    factors: vec![factor("a", 3, &mut rng), factor("b", 2, &mut rng), factor("c", 4, &mut rng)],
                })
                .collect(),
        }
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(group_advantages(&[1.0; 4], 1e-8), vec![0.0; 4]);
        let a = group_advantages(&[0.0, 1.0], 1e-8);
        assert!((a[0] + 1.0).abs() <= 2e-8 && (a[1] - 1.0).abs() <= 2e-8);
        assert!(a[1] < 1.0);
    }

    proptest! {
        #[test]
        fn constant_groups_have_zero_advantage(v in -1e3f64..1e3, k in 1usize..64) {
            prop_assert!(group_advantages(&vec![v; k], 1e-8).iter().all(|a| *a == 0.0));
        }

        #[test]
        fn advantages_centered_and_scaled(r in proptest::collection::vec(-5.0f64..5.0, 2..32)) {
            let a = group_advantages(&r, 1e-8);
            let k = r.len() as f64;
            prop_assert!(a.iter().sum::<f64>().abs() <= 1e-9 * k);
            let mu = r.iter().sum::<f64>() / k;
            let sigma = (r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / k).sqrt();
            if sigma > 1e-6 {
                let sa = (a.iter().map(|v| v * v).sum::<f64>() / k).sqrt();
                prop_assert!((sa - sigma / (sigma + 1e-8)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate(1.0, 1.0, 0.2), 1.0);
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    }

    #[test]
    fn kl_examples() {
        let f = |p: [f64; 2]| ToyPolicy {
            images: vec![ImagePolicy {
                image: 0,
                factors: vec![Factor { name: "f".into(), labels: vec!["a".into(), "b".into()], logits: p.map(f64::ln).to_vec() }],
            }],
        };
        let kl = kl_to_reference(&f([0.5, 0.5]), &f([0.25, 0.75])).unwrap();
        let oracle = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - oracle).abs() < 1e-15);
        assert_eq!(kl_to_reference(&f([0.3, 0.7]), &f([0.3, 0.7])).unwrap(), 0.0);
        assert!(matches!(kl_to_reference(&f([0.5, 0.5]), &tiny_policy(0)), Err(GrpoError::StructureMismatch(_))));
    }

    #[test]
    fn sampling_frequencies_match_uniform() {
        let template = ProtocolTemplate::small_test();
        let mut policy = ToyPolicy::uniform(std::slice::from_ref(&template));
        policy.images[0].factors[0].logits.truncate(4);
        policy.images[0].factors[0].labels.truncate(4);
        let cfg = GrpoConfig { group_size: 100_000, ..GrpoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_group(&policy, &template, 0, &cfg, &mut rng);
        for c in 0..4 {
            let freq = g.samples.iter().filter(|s| s.choices[0] == c).count() as f64 / 1e5;
            assert!((freq - 0.25).abs() < 0.01, "category {c}: {freq}");
        }
    }

    #[test]
    fn cold_sampling_is_greedy() {
        let template = ProtocolTemplate::small_test();
        let mut policy = ToyPolicy::uniform(std::slice::from_ref(&template));
        for (i, f) in policy.images[0].factors.iter_mut().enumerate() {
            let n = f.logits.len();
            f.logits[(i + 1) % n] = 0.5;
        }
        let cfg = GrpoConfig { temperature: 1e-6, ..GrpoConfig::default() };
        let g = sample_group(&policy, &template, 0, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(g.samples.len(), 16);
        for s in &g.samples {
            assert_eq!(s.choices, g.samples[0].choices);
            assert!(s.choices.iter().enumerate().all(|(i, &c)| c == (i + 1) % policy.images[0].factors[i].logits.len()));
        }
    }

    fn random_groups(policy: &ToyPolicy, old: &ToyPolicy, rng: &mut ChaCha8Rng) -> Vec<PolicyGroup> {
        (0..2)
            .map(|image| {
                let rewards: Vec<f64> = (0..6).map(|_| rng.random()).collect();
                let adv = group_advantages(&rewards, 1e-8);
                let samples = adv
                    .iter()
                    .map(|&a| {
                        let choices: Vec<usize> =
                            policy.images[image].factors.iter().map(|f| rng.random_range(0..f.logits.len())).collect();
                        Sample {
                            logp: log_prob(&policy.images[image], &choices),
                            logp_old: log_prob(&old.images[image], &choices),
                            choices,
                            protocol: TextProtocol::empty(1, 1),
                            reward: 0.0,
                            advantage: a,
                        }
                    })
                    .collect();
                PolicyGroup { image, samples }
            })
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let reference = tiny_policy(seed);
            let policy = tiny_policy(seed + 50);
            // Rollout snapshot close to θ so some ratios are clipped and some not.
            let mut old = policy.clone();
            for f in old.images.iter_mut().flat_map(|i| i.factors.iter_mut()) {
                for z in &mut f.logits {
                    *z += rng.random_range(-0.15..0.15);
                }
            }
            let groups = random_groups(&policy, &old, &mut rng);
            let cfg = GrpoConfig::default();
            let (_, grad, _) = loss_and_grad(&policy, &reference, &groups, &cfg);
            let h = 1e-6;
            for (ii, img) in policy.images.iter().enumerate() {
                for (fi, f) in img.factors.iter().enumerate() {
                    for j in 0..f.logits.len() {
                        let bump = |d: f64| {
                            let mut p = policy.clone();
                            p.images[ii].factors[fi].logits[j] += d;
                            loss_and_grad(&p, &reference, &groups, &cfg).0
                        };
                        let fd = (bump(h) - bump(-h)) / (2.0 * h);
                        let an = grad[ii][fi][j];
                        let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-6);
                        assert!(rel < 1e-4, "seed {seed} img {ii} factor {fi} j {j}: fd {fd} an {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn kl_gradient_vanishes_at_reference() {
        let p = tiny_policy(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut groups = random_groups(&p, &p, &mut rng);
        for s in groups.iter_mut().flat_map(|g| g.samples.iter_mut()) {
            s.advantage = 0.0;
        }
        let (_, grad, clipped) = loss_and_grad(&p, &p, &groups, &GrpoConfig::default());
        assert_eq!(clipped, 0);
        assert!(grad.iter().flatten().flatten().all(|g| *g == 0.0));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = GrpoConfig::default();
        assert_eq!((c.group_size, c.learning_rate, c.total_steps, c.batch_size), (16, 1e-4, 2000, 32));
        assert_eq!((c.clip, c.kl_beta, c.temperature, c.eps_adv, c.inner_epochs), (0.2, 0.01, 0.8, 1e-8, 1));
        assert!(GrpoConfig { group_size: 0, ..c.clone() }.validate().is_err());
        assert!(GrpoConfig { clip: 0.0, ..c.clone() }.validate().is_err());
        assert!(GrpoConfig { temperature: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = tiny_policy(9);
        assert_eq!(ToyPolicy::from_json(&p.to_json()).unwrap(), p);
        let mut bad = p.clone();
        bad.images[0].factors[1].logits.truncate(1);
        bad.images[0].factors[1].labels.truncate(1);
        assert!(ToyPolicy::from_json(&bad.to_json()).is_err());
    }
}
