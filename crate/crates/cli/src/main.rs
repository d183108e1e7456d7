//! `layerparse`: batch entry point. Machine-readable JSON goes to stdout,
//! diagnostics to stderr. Exit codes: 0 success, 1 validation or domain
//! error, 2 I/O error, 3 internal invariant failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use layerparse_core::eval::{self, AttrThresholds, CorpusKnobs, EvalError, ItemMeta};
use layerparse_core::grpo::{self, CachedReward, GrpoConfig, GrpoError, ToyPolicy};
use layerparse_core::lta::{lta_grad_check, LtaError};
use layerparse_core::protocol::{parse_protocol, validate, ProtocolError, TextProtocol};
use layerparse_core::raster::{alpha_over, read_png, write_png, Raster, RasterError};
use layerparse_core::render::{layout_instance, layout_svg, render_text_layer, BoxFont, GlyphSource, RenderError};
use layerparse_core::reward::{parser_reward, RewardContext, RewardError, RewardWeights};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "layerparse", version, about = "Layered graphic-design parsing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a text rendering protocol; violations are listed on stderr.
    Validate {
        #[arg(long)]
        protocol: PathBuf,
    },
    /// Render a protocol to an RGBA text layer.
    Render {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FontSource::Boxfont)]
        font_source: FontSource,
        /// Also write an SVG of glyph origins and baselines.
        #[arg(long)]
        layout_svg: Option<PathBuf>,
    },
    /// Composite text over sticker over background.
    Compose {
        #[arg(long)]
        bg: PathBuf,
        /// Omitted layers are fully transparent.
        #[arg(long)]
        sticker: Option<PathBuf>,
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a seeded synthetic corpus, one directory per item.
    GenCorpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        count: usize,
        /// Canvas size as WxH.
        #[arg(long, default_value = "512x512", value_parser = parse_size)]
        size: (u32, u32),
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        knobs: KnobArgs,
    },
    /// Score a protocol against a reference item; prints the reward breakdown.
    Reward {
        /// The design image the protocol was parsed from.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        /// Reference item directory holding protocol.json and text.png.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Reward weights pix,loc,sem; normalized to sum to 1.
        #[arg(long, default_value = "1,1,1", value_parser = parse_weights)]
        weights: RewardWeights,
    },
    /// Score predictions against a corpus and write report.json.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding attribute thresholds.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Train the factorized toy policy on a corpus with GRPO.
    GrpoTrain(TrainArgs),
    /// Finite-difference check of the layer token attention gradients.
    LtaCheck {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FontSource {
    Boxfont,
}

#[derive(Args)]
struct KnobArgs {
    #[arg(long, default_value_t = 1)]
    min_instances: usize,
    #[arg(long, default_value_t = 5)]
    max_instances: usize,
    /// Fraction of instances set on a Bézier path.
    #[arg(long, default_value_t = 0.2)]
    curve_fraction: f64,
    #[arg(long, default_value_t = 6)]
    max_stickers: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 16)]
    group: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.2)]
    clip: f64,
    #[arg(long, default_value_t = 0.01)]
    kl: f64,
    #[arg(long, default_value_t = 0.8)]
    temp: f64,
    #[arg(long, default_value_t = 1)]
    inner_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Position bins per axis.
    #[arg(long, default_value_t = 8)]
    grid: u32,
    #[arg(long, default_value = "1,1,1", value_parser = parse_weights)]
    weights: RewardWeights,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
}

enum Failure {
    Domain(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Io(m) | Failure::Internal(m) => m,
        }
    }

    fn at(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<RasterError> for Failure {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::Io(_) | RasterError::Png(_) => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<RewardError> for Failure {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Raster(r) => r.into(),
            e => Failure::Domain(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => Failure::Io(e.to_string()),
            EvalError::Raster(r) => r.into(),
            EvalError::Reward(r) => r.into(),
            e => Failure::Domain(e.to_string()),
        }
    }
}

impl From<GrpoError> for Failure {
    fn from(e: GrpoError) -> Self {
        match e {
            GrpoError::Io(_) => Failure::Io(e.to_string()),
            e => Failure::Domain(e.to_string()),
        }
    }
}

impl From<LtaError> for Failure {
    fn from(e: LtaError) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("width and height must be positive".into());
    }
    Ok((w, h))
}

fn parse_weights(s: &str) -> Result<RewardWeights, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    let [pix, loc, sem] = v[..] else { return Err("expected three comma-separated weights".into()) };
    RewardWeights::new(pix, loc, sem).map_err(|e| e.to_string())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::at(path, e))
}

fn read_protocol(path: &Path) -> Result<TextProtocol, Failure> {
    Ok(parse_protocol(&read_bytes(path)?)?)
}

fn read_image(path: &Path) -> Result<Raster, Failure> {
    read_png(path).map_err(|e| match e {
        RasterError::Io(_) | RasterError::Png(_) => Failure::at(path, e),
        e => e.into(),
    })
}

fn write_text(path: &Path, s: &str) -> Result<(), Failure> {
    fs::write(path, s).map_err(|e| Failure::at(path, e))
}

fn print_json(v: &serde_json::Value) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, v).map_err(|e| Failure::Internal(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn glyphs(_: FontSource) -> Box<dyn GlyphSource> {
    Box::new(BoxFont)
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let p = match parse_protocol(&read_bytes(path)?) {
        Ok(p) => p,
        Err(ProtocolError::Range(v) | ProtocolError::InvalidProtocol(v)) => {
            return Err(Failure::Domain(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")));
        }
        Err(e) => return Err(e.into()),
    };
    let violations = validate(&p);
    if violations.is_empty() {
        return Ok(());
    }
    Err(Failure::Domain(violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")))
}

fn cmd_render(protocol: &Path, out: &Path, source: FontSource, svg: Option<&Path>) -> Result<(), Failure> {
    let p = read_protocol(protocol)?;
    let glyphs = glyphs(source);
    let layer = render_text_layer(&p, glyphs.as_ref())?;
    write_png(out, &layer).map_err(|e| Failure::at(out, e))?;
    if let Some(svg) = svg {
        let runs = p.z_sorted().into_iter().map(|i| layout_instance(&p.instances[i], glyphs.as_ref())).collect::<Result<Vec<_>, _>>()?;
        write_text(svg, &layout_svg(&runs, p.canvas_width, p.canvas_height))?;
    }
    log::info!("rendered {} instances to {}", p.instances.len(), out.display());
    Ok(())
}

fn cmd_compose(bg: &Path, sticker: Option<&Path>, text: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let bg = read_image(bg)?;
    let (w, h) = bg.dims();
    let layer = |p: Option<&Path>| p.map_or_else(|| Ok(Raster::new(w, h)), read_image);
    let (sticker, text) = (layer(sticker)?, layer(text)?);
    let design = alpha_over(&text, &alpha_over(&sticker, &bg)?)?;
    write_png(out, &design).map_err(|e| Failure::at(out, e))?;
    Ok(())
}

fn cmd_gen_corpus(seed: u64, count: usize, size: (u32, u32), out: &Path, knobs: KnobArgs) -> Result<(), Failure> {
    let knobs = CorpusKnobs {
        min_instances: knobs.min_instances,
        max_instances: knobs.max_instances,
        curve_fraction: knobs.curve_fraction,
        max_stickers: knobs.max_stickers,
    };
    knobs.validate()?;
    if count == 0 {
        return Err(Failure::Domain("count must be at least 1".into()));
    }
    fs::create_dir_all(out).map_err(|e| Failure::at(out, e))?;
    // Items are independent; generating and writing one at a time keeps
    // memory flat for large corpora.
    (0..count).into_par_iter().try_for_each(|index| -> Result<(), Failure> {
        let item = eval::generate_item(seed, index, size, &knobs)?;
        let meta = ItemMeta { seed, index, width: size.0, height: size.1, knobs: knobs.clone() };
        eval::write_item(out, &item, &meta)?;
        Ok(())
    })?;
    log::info!("wrote {count} items to {}", out.display());
    print_json(&json!({ "items": count, "seed": seed, "width": size.0, "height": size.1, "out": out }))
}

fn cmd_reward(input: &Path, protocol: &Path, reference: &Path, weights: RewardWeights) -> Result<(), Failure> {
    let input = read_image(input)?;
    let pred = read_protocol(protocol)?;
    let ref_protocol = read_protocol(&reference.join("protocol.json"))?;
    let ref_layer = read_image(&reference.join("text.png"))?;
    let ctx = RewardContext::from_reference(input, &ref_protocol, &ref_layer)?;
    let breakdown = parser_reward(&pred, &ctx, weights, &BoxFont)?;
    if let Some(note) = &breakdown.note {
        log::warn!("{note}");
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", breakdown.to_json())?;
    Ok(())
}

fn cmd_evaluate(pred: &Path, corpus: &Path, out: &Path, thresholds: Option<&Path>) -> Result<(), Failure> {
    let th = match thresholds {
        Some(p) => serde_json::from_slice::<AttrThresholds>(&read_bytes(p)?)
            .map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?,
        None => AttrThresholds::default(),
    };
    let items = eval::read_corpus(corpus)?;
    if items.is_empty() {
        return Err(Failure::Domain(format!("{}: corpus has no items", corpus.display())));
    }
    let preds = eval::read_predictions(pred)?;
    let report = eval::evaluate(&preds, &items, &th, &BoxFont)?;
    report.write(out).map_err(|e| Failure::at(out, e))?;
    let mut summary = serde_json::to_value(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("items");
        obj.insert("count".into(), json!(report.items.len()));
    }
    print_json(&summary)
}

fn cmd_grpo_train(a: TrainArgs) -> Result<(), Failure> {
    let cfg = GrpoConfig {
        group_size: a.group,
        learning_rate: a.lr,
        total_steps: a.steps,
        batch_size: a.batch,
        clip: a.clip,
        kl_beta: a.kl,
        temperature: a.temp,
        inner_epochs: a.inner_epochs,
        seed: a.seed,
        ..GrpoConfig::default()
    };
    cfg.validate()?;
    let items = eval::read_corpus(&a.corpus)?;
    let (templates, contexts) = eval::grpo_training_set(&items, a.grid)?;
    let reward = CachedReward::new(contexts, a.weights, Box::new(BoxFont));
    let initial = ToyPolicy::uniform(&templates);
    let log_file = fs::File::create(&a.log).map_err(|e| Failure::at(&a.log, e))?;
    let mut log = BufWriter::new(log_file);
    let (policy, history) = grpo::train(&initial, &templates, &cfg, &reward, Some(&mut log))?;
    log.flush().map_err(|e| Failure::at(&a.log, e))?;
    write_text(&a.out, &(policy.to_json() + "\n"))?;
    log::info!("trained {} steps over {} images", history.len(), templates.len());
    print_json(&json!({
        "steps": history.len(),
        "images": templates.len(),
        "final": history.last(),
        "config": cfg,
    }))
}

fn cmd_lta_check(n: usize, d: usize, heads: usize, seed: u64, tol: f64) -> Result<(), Failure> {
    if n == 0 || d == 0 {
        return Err(Failure::Domain("n and d must be positive".into()));
    }
    let report = lta_grad_check(n, d, heads, seed)?;
    print_json(&serde_json::to_value(&report).map_err(|e| Failure::Internal(e.to_string()))?)?;
    if !(report.worst <= tol) {
        return Err(Failure::Internal(format!("gradient check failed: worst relative error {:e} > {tol:e}", report.worst)));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { protocol } => cmd_validate(&protocol),
        Command::Render { protocol, out, font_source, layout_svg } => cmd_render(&protocol, &out, font_source, layout_svg.as_deref()),
        Command::Compose { bg, sticker, text, out } => cmd_compose(&bg, sticker.as_deref(), text.as_deref(), &out),
        Command::GenCorpus { seed, count, size, out, knobs } => cmd_gen_corpus(seed, count, size, &out, knobs),
        Command::Reward { input, protocol, reference, weights } => cmd_reward(&input, &protocol, &reference, weights),
        Command::Evaluate { pred, corpus, out, thresholds } => cmd_evaluate(&pred, &corpus, &out, thresholds.as_deref()),
        Command::GrpoTrain(args) => cmd_grpo_train(args),
        Command::LtaCheck { n, d, heads, seed, tol } => cmd_lta_check(n, d, heads, seed, tol),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAYERPARSE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage mistakes count as validation errors, not I/O errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
