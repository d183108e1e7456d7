//! Python bindings: protocols, rasters, rendering, the parser reward, GRPO
//! statistics and training, the LTA gradient check, and corpus evaluation.
//! Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use layerparse_core::eval::{self, AttrThresholds, CorpusKnobs, ItemMeta};
use layerparse_core::grpo::{self, CachedReward, GrpoConfig, ToyPolicy};
use layerparse_core::protocol::{parse_protocol, serialize_protocol, validate};
use layerparse_core::raster::{self, alpha_over, mask_from_alpha};
use layerparse_core::render::{render_text_layer, BoxFont};
use layerparse_core::reward::{self, RewardContext, RewardWeights};
use layerparse_core::{lta, protocol};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn raster_err(e: raster::RasterError) -> PyErr {
    match e {
        raster::RasterError::Io(_) | raster::RasterError::Png(_) => io_err(e),
        e => value_err(e),
    }
}

fn eval_err(e: eval::EvalError) -> PyErr {
    match e {
        eval::EvalError::Io(_) => io_err(e),
        eval::EvalError::Raster(r) => raster_err(r),
        e => value_err(e),
    }
}

/// Parses a JSON string with Python's `json` module.
fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn json_of(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(value_err)
}

fn weights(w: (f64, f64, f64)) -> PyResult<RewardWeights> {
    RewardWeights::new(w.0, w.1, w.2).map_err(value_err)
}

/// An RGBA8 image, row-major.
#[pyclass(module = "layerparse", frozen)]
struct Raster(raster::Raster);

#[pymethods]
impl Raster {
    /// A fully transparent image.
    #[new]
    fn new(width: u32, height: u32) -> Self {
        Raster(raster::Raster::new(width, height))
    }

    #[staticmethod]
    fn from_bytes(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        raster::Raster::from_bytes(width, height, data).map(Raster).map_err(raster_err)
    }

    #[staticmethod]
    fn read_png(path: PathBuf) -> PyResult<Self> {
        raster::read_png(&path).map(Raster).map_err(raster_err)
    }

    fn write_png(&self, path: PathBuf) -> PyResult<()> {
        raster::write_png(&path, &self.0).map_err(raster_err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<(u8, u8, u8, u8)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(value_err(format!("pixel ({x}, {y}) outside {}x{}", self.0.width(), self.0.height())));
        }
        let [r, g, b, a] = self.0.get(x, y);
        Ok((r, g, b, a))
    }

    /// This image composited source-over onto `bottom`.
    fn over(&self, bottom: &Raster) -> PyResult<Raster> {
        alpha_over(&self.0, &bottom.0).map(Raster).map_err(raster_err)
    }

    fn __eq__(&self, other: &Raster) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Raster({}x{})", self.0.width(), self.0.height())
    }
}

/// A text rendering protocol.
#[pyclass(module = "layerparse", frozen)]
struct TextProtocol(protocol::TextProtocol);

#[pymethods]
impl TextProtocol {
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        parse_protocol(json.as_bytes()).map(TextProtocol).map_err(value_err)
    }

    #[staticmethod]
    fn empty(width: u32, height: u32) -> Self {
        TextProtocol(protocol::TextProtocol::empty(width, height))
    }

    /// Canonical JSON.
    fn to_json(&self) -> PyResult<String> {
        serialize_protocol(&self.0).map_err(value_err)
    }

    /// Violations as "path: message" strings; empty when valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.0).iter().map(|v| v.to_string()).collect()
    }

    fn render(&self) -> PyResult<Raster> {
        render_text_layer(&self.0, &BoxFont).map(Raster).map_err(value_err)
    }

    #[getter]
    fn canvas(&self) -> (u32, u32) {
        (self.0.canvas_width, self.0.canvas_height)
    }

    #[getter]
    fn texts(&self) -> Vec<String> {
        self.0.instances.iter().map(|i| i.semantic.text.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.instances.len()
    }

    fn __eq__(&self, other: &TextProtocol) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("TextProtocol({}x{}, {} instances)", self.0.canvas_width, self.0.canvas_height, self.0.instances.len())
    }
}

/// Reward breakdown of `pred` scored against a reference item: the design
/// `input`, the reference protocol and its rendered text layer.
#[pyfunction]
#[pyo3(signature = (pred, input, reference, reference_layer, weights = (1.0, 1.0, 1.0)))]
fn parser_reward<'py>(
    py: Python<'py>,
    pred: &TextProtocol,
    input: &Raster,
    reference: &TextProtocol,
    reference_layer: &Raster,
    weights: (f64, f64, f64),
) -> PyResult<Bound<'py, PyAny>> {
    let ctx = RewardContext::from_reference(input.0.clone(), &reference.0, &reference_layer.0).map_err(value_err)?;
    let b = reward::parser_reward(&pred.0, &ctx, self::weights(weights)?, &BoxFont).map_err(value_err)?;
    to_py(py, &b.to_json())
}

#[pyfunction]
fn levenshtein_sim(a: &str, b: &str) -> f64 {
    reward::levenshtein_sim(a, b)
}

/// IoU of the nonzero-alpha masks of two same-size images.
#[pyfunction]
fn alpha_iou(pred: &Raster, gt: &Raster) -> PyResult<f64> {
    raster::iou(&mask_from_alpha(&pred.0, 0), &mask_from_alpha(&gt.0, 0)).map_err(raster_err)
}

#[pyfunction]
#[pyo3(signature = (rewards, eps = 1e-8))]
fn group_advantages(rewards: Vec<f64>, eps: f64) -> Vec<f64> {
    grpo::group_advantages(&rewards, eps)
}

#[pyfunction]
#[pyo3(signature = (ratio, advantage, clip = 0.2))]
fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    grpo::clipped_surrogate(ratio, advantage, clip)
}

/// Trains the factorized policy on the single-image toy task and returns the
/// exact expected reward before and after, the final KL and the step log.
#[pyfunction]
#[pyo3(signature = (task_seed = 0, seed = 0, steps = 500, group = 16, lr = 1e-4, clip = 0.2, kl = 0.01, temp = 0.8, inner_epochs = 1))]
#[allow(clippy::too_many_arguments)]
fn train_toy<'py>(
    py: Python<'py>,
    task_seed: u64,
    seed: u64,
    steps: usize,
    group: usize,
    lr: f64,
    clip: f64,
    kl: f64,
    temp: f64,
    inner_epochs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = GrpoConfig {
        group_size: group,
        learning_rate: lr,
        total_steps: steps,
        clip,
        kl_beta: kl,
        temperature: temp,
        inner_epochs,
        seed,
        ..GrpoConfig::default()
    };
    let task = grpo::toy_task(task_seed);
    let templates = vec![task.template.clone()];
    let reward = CachedReward::new(vec![task.context.clone()], RewardWeights::equal(), Box::new(BoxFont));
    let initial = ToyPolicy::uniform(&templates);
    let (policy, history) = py
        .detach(|| grpo::train(&initial, &templates, &cfg, &reward, None))
        .map_err(value_err)?;
    let before = grpo::expected_reward(&initial, &task.template, 0, temp, &reward);
    let after = grpo::expected_reward(&policy, &task.template, 0, temp, &reward);
    let out = serde_json::json!({
        "initial_reward": before,
        "final_reward": after,
        "kl": grpo::kl_to_reference(&policy, &initial).map_err(value_err)?,
        "history": history,
        "policy": policy,
    });
    to_py(py, &out.to_string())
}

/// Finite-difference check of the layer token attention backward pass.
#[pyfunction]
#[pyo3(signature = (n = 4, d = 8, heads = 2, seed = 7))]
fn lta_grad_check<'py>(py: Python<'py>, n: usize, d: usize, heads: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let report = lta::lta_grad_check(n, d, heads, seed).map_err(value_err)?;
    to_py(py, &json_of(&report)?)
}

/// Writes a seeded synthetic corpus under `out`, one directory per item.
#[pyfunction]
#[pyo3(signature = (out, count, seed = 0, width = 512, height = 512))]
fn generate_corpus(py: Python<'_>, out: PathBuf, count: usize, seed: u64, width: u32, height: u32) -> PyResult<()> {
    let knobs = CorpusKnobs::default();
    py.detach(|| {
        let items = eval::generate_corpus(seed, count, (width, height), &knobs)?;
        for (index, item) in items.iter().enumerate() {
            let meta = ItemMeta { seed, index, width, height, knobs: knobs.clone() };
            eval::write_item(&out, item, &meta)?;
        }
        Ok(())
    })
    .map_err(eval_err)
}

/// Evaluates a prediction directory against a corpus directory; returns the
/// full report.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, pred: PathBuf, corpus: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = py
        .detach(|| {
            let items = eval::read_corpus(&corpus)?;
            let preds = eval::read_predictions(&pred)?;
            eval::evaluate(&preds, &items, &AttrThresholds::default(), &BoxFont)
        })
        .map_err(eval_err)?;
    to_py(py, &json_of(&report)?)
}

#[pymodule]
fn layerparse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Raster>()?;
    m.add_class::<TextProtocol>()?;
    m.add_function(wrap_pyfunction!(parser_reward, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein_sim, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_iou, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(clipped_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(train_toy, m)?)?;
    m.add_function(wrap_pyfunction!(lta_grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
