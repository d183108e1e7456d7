//! Layer Token Attention: at every spatial position the three branch tokens
//! (condition, background, sticker) attend to each other with shared
//! projections, and each branch receives the result through a sigmoid-gated
//! residual. Row-vector convention: projections are `S · W`.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub const BRANCHES: usize = 3;
pub const DEFAULT_GATE: f64 = -4.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LtaError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Branch-stacked tokens, shape `3 × N × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTensor(Array3<f64>);

impl TokenTensor {
    pub fn new(values: Array3<f64>) -> Result<Self, LtaError> {
        let (b, n, d) = values.dim();
        if b != BRANCHES || n == 0 || d == 0 {
            return Err(LtaError::ShapeMismatch(format!("tokens must be 3×N×d with N, d ≥ 1, got {b}×{n}×{d}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LtaError::NonFinite("tokens"));
        }
        Ok(Self(values))
    }

    /// Stacks three `N × d` branch feature maps.
    pub fn stack(condition: ArrayView2<f64>, background: ArrayView2<f64>, sticker: ArrayView2<f64>) -> Result<Self, LtaError> {
        if condition.dim() != background.dim() || condition.dim() != sticker.dim() {
            return Err(LtaError::ShapeMismatch(format!(
                "branches must share N and d: {:?}, {:?}, {:?}",
                condition.dim(),
                background.dim(),
                sticker.dim()
            )));
        }
        let v = ndarray::stack(Axis(0), &[condition, background, sticker]).expect("equal shapes");
        Self::new(v)
    }

    pub fn positions(&self) -> usize {
        self.0.dim().1
    }

    pub fn dim(&self) -> usize {
        self.0.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn into_values(self) -> Array3<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtaParams {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_o: Array2<f64>,
    pub heads: usize,
    /// Gate logits for condition, background, sticker.
    pub alpha: [f64; 3],
}

impl LtaParams {
    /// Projections drawn from N(0, 1/d), identity output projection, gates at
    /// [`DEFAULT_GATE`].
    pub fn init(d: usize, heads: usize, seed: u64) -> Result<Self, LtaError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let mut w = || Array2::from_shape_fn((d, d), |_| -> f64 { let z: f64 = StandardNormal.sample(&mut rng); scale * z });
        let p = Self { w_q: w(), w_k: w(), w_v: w(), w_o: Array2::eye(d), heads, alpha: [DEFAULT_GATE; 3] };
        p.check(d)?;
        Ok(p)
    }

    fn check(&self, d: usize) -> Result<(), LtaError> {
        if self.heads == 0 || d % self.heads != 0 {
            return Err(LtaError::ShapeMismatch(format!("d = {d} not divisible by heads = {}", self.heads)));
        }
        for (name, m) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v), ("w_o", &self.w_o)] {
            if m.dim() != (d, d) {
                return Err(LtaError::ShapeMismatch(format!("{name} is {:?}, expected ({d}, {d})", m.dim())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(LtaError::NonFinite(name));
            }
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(LtaError::NonFinite("alpha"));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Intermediates of one position.
struct PositionPass {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Per-head attention weights, each 3×3.
    attn: Vec<Array2<f64>>,
    /// Concatenated head outputs before `W_O`.
    heads_out: Array2<f64>,
    /// Branch outputs after `W_O` (pre-gate).
    out: Array2<f64>,
}

fn position_pass(s_n: ArrayView2<f64>, p: &LtaParams) -> PositionPass {
    let d = s_n.ncols();
    let dh = d / p.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (q, k, v) = (s_n.dot(&p.w_q), s_n.dot(&p.w_k), s_n.dot(&p.w_v));
    let mut heads_out = Array2::zeros((BRANCHES, d));
    let mut attn = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut a);
        heads_out.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        attn.push(a);
    }
    let out = heads_out.dot(&p.w_o);
    PositionPass { q, k, v, attn, heads_out, out }
}

fn check_shapes(tokens: &TokenTensor, p: &LtaParams) -> Result<(), LtaError> {
    p.check(tokens.dim())
}

/// `T̃^(k) = T^(k) + σ(α_k) · T_out^(k)` at every position.
pub fn lta_forward(tokens: &TokenTensor, params: &LtaParams) -> Result<TokenTensor, LtaError> {
    check_shapes(tokens, params)?;
    let t = tokens.values();
    let gates = params.alpha.map(sigmoid);
    let mut y = t.clone();
    for n in 0..tokens.positions() {
        let pass = position_pass(t.slice(s![.., n, ..]), params);
        for (b, g) in gates.iter().enumerate() {
            let mut row = y.slice_mut(s![b, n, ..]);
            row.scaled_add(*g, &pass.out.row(b));
        }
    }
    Ok(TokenTensor(y))
}

/// Per-position attention weights `[n][head]` (3×3, rows sum to 1).
pub fn lta_attention(tokens: &TokenTensor, params: &LtaParams) -> Result<Vec<Vec<Array2<f64>>>, LtaError> {
    check_shapes(tokens, params)?;
    Ok((0..tokens.positions()).map(|n| position_pass(tokens.values().slice(s![.., n, ..]), params).attn).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtaGrads {
    pub tokens: Array3<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_o: Array2<f64>,
    pub alpha: [f64; 3],
}

/// Gradients of `Σ upstream ⊙ lta_forward(tokens)` with respect to the tokens
/// and every parameter.
pub fn lta_backward(tokens: &TokenTensor, params: &LtaParams, upstream: &Array3<f64>) -> Result<LtaGrads, LtaError> {
    check_shapes(tokens, params)?;
    if upstream.dim() != tokens.values().dim() {
        return Err(LtaError::ShapeMismatch(format!(
            "upstream {:?} vs tokens {:?}",
            upstream.dim(),
            tokens.values().dim()
        )));
    }
    let t = tokens.values();
    let d = tokens.dim();
    let dh = d / params.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let gates = params.alpha.map(sigmoid);

    let mut g = LtaGrads {
        // Residual path.
        tokens: upstream.clone(),
        w_q: Array2::zeros((d, d)),
        w_k: Array2::zeros((d, d)),
        w_v: Array2::zeros((d, d)),
        w_o: Array2::zeros((d, d)),
        alpha: [0.0; 3],
    };
    for n in 0..tokens.positions() {
        let s_n = t.slice(s![.., n, ..]);
        let pass = position_pass(s_n, params);
        let up = upstream.slice(s![.., n, ..]);

        let mut d_out = Array2::zeros((BRANCHES, d));
        for b in 0..BRANCHES {
            let gate = gates[b];
            g.alpha[b] += gate * (1.0 - gate) * up.row(b).dot(&pass.out.row(b));
            d_out.row_mut(b).assign(&(&up.row(b) * gate));
        }
        g.w_o += &pass.heads_out.t().dot(&d_out);
        let d_heads = d_out.dot(&params.w_o.t());

        let (mut dq, mut dk, mut dv) = (Array2::zeros((BRANCHES, d)), Array2::zeros((BRANCHES, d)), Array2::zeros((BRANCHES, d)));
        for (h, a) in pass.attn.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let d_oh = d_heads.slice(cols);
            let d_a = d_oh.dot(&pass.v.slice(cols).t());
            dv.slice_mut(cols).assign(&a.t().dot(&d_oh));
            // Softmax backward per row: dS = A ⊙ (dA − Σ_j dA·A).
            let row_dot = (&d_a * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            let d_scores = a * &(&d_a - &row_dot) * scale;
            dq.slice_mut(cols).assign(&d_scores.dot(&pass.k.slice(cols)));
            dk.slice_mut(cols).assign(&d_scores.t().dot(&pass.q.slice(cols)));
        }
        g.w_q += &s_n.t().dot(&dq);
        g.w_k += &s_n.t().dot(&dk);
        g.w_v += &s_n.t().dot(&dv);
        let d_s = dq.dot(&params.w_q.t()) + dk.dot(&params.w_k.t()) + dv.dot(&params.w_v.t());
        let mut gt = g.tokens.slice_mut(s![.., n, ..]);
        gt += &d_s;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub n: usize,
    pub d: usize,
    pub heads: usize,
    pub seed: u64,
    /// Worst relative error per group: tokens, w_q, w_k, w_v, w_o, alpha.
    pub max_rel_error: BTreeMap<String, f64>,
    pub worst: f64,
}

pub const FD_STEP: f64 = 1e-6;

/// Denominator floor of [`relative_error`]. With step 1e-6 and unit-normal
/// weights the loss reaches ~1e3, so central differences carry ~1e-7 of
/// roundoff; entries smaller than the floor are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-2;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central-difference check of [`lta_backward`] on tokens, parameters and an
/// upstream gradient all drawn from N(0, 1).
pub fn lta_grad_check(n: usize, d: usize, heads: usize, seed: u64) -> Result<GradCheckReport, LtaError> {
    if heads == 0 || d % heads != 0 {
        return Err(LtaError::ShapeMismatch(format!("d = {d} not divisible by heads = {heads}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let tokens = TokenTensor::new(Array3::from_shape_fn((BRANCHES, n, d), |_| normal()))?;
    let mut mat = || Array2::from_shape_fn((d, d), |_| normal());
    let (w_q, w_k, w_v, w_o) = (mat(), mat(), mat(), mat());
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let params = LtaParams { w_q, w_k, w_v, w_o, heads, alpha: [normal(), normal(), normal()] };
    let upstream = Array3::from_shape_fn((BRANCHES, n, d), |_| normal());

    let grads = lta_backward(&tokens, &params, &upstream)?;
    let loss = |t: &TokenTensor, p: &LtaParams| -> f64 {
        (lta_forward(t, p).expect("shapes checked").values() * &upstream).sum()
    };

    let mut report = BTreeMap::new();
    let mut worst_of = |name: &str, err: f64| {
        let e = report.entry(name.to_string()).or_insert(0.0f64);
        *e = e.max(err);
    };

    for idx in ndarray::indices((BRANCHES, n, d)) {
        let bump = |h: f64| {
            let mut v = tokens.values().clone();
            v[idx] += h;
            loss(&TokenTensor(v), &params)
        };
        let fd = (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP);
        worst_of("tokens", relative_error(grads.tokens[idx], fd));
    }
    type Pick = fn(&mut LtaParams) -> &mut Array2<f64>;
    let mats: [(&str, Pick, &Array2<f64>); 4] = [
        ("w_q", |p| &mut p.w_q, &grads.w_q),
        ("w_k", |p| &mut p.w_k, &grads.w_k),
        ("w_v", |p| &mut p.w_v, &grads.w_v),
        ("w_o", |p| &mut p.w_o, &grads.w_o),
    ];
    for (name, pick, analytic) in mats {
        for idx in ndarray::indices((d, d)) {
            let bump = |h: f64| {
                let mut p = params.clone();
                pick(&mut p)[idx] += h;
                loss(&tokens, &p)
            };
            let fd = (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP);
            worst_of(name, relative_error(analytic[idx], fd));
        }
    }
    for b in 0..BRANCHES {
        let bump = |h: f64| {
            let mut p = params.clone();
            p.alpha[b] += h;
            loss(&tokens, &p)
        };
        let fd = (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP);
        worst_of("alpha", relative_error(grads.alpha[b], fd));
    }
    let worst = report.values().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { n, d, heads, seed, max_rel_error: report, worst })
}
