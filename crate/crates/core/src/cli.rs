//! The `polsar` command line. Every subcommand reads and writes the formats
//! in [`crate::io`], writes one run manifest into `--out`, prints a JSON
//! summary on stdout and, on failure, a JSON error object on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::grid::Grid;
use crate::io::composite::CompositeSource;
use crate::io::{self, CompositeMode, IoError, PlaneStack, RunConfig, RunManifest};
use crate::labels::generate_labels;
use crate::polsar::{boxcar_coherency, span_raster, PolsarError, PolsarRaster, RasterMetadata, ScatteringMatrix};
use crate::pretrain::{self, PretrainError, TrainingScene};
use crate::queries::{independence_report, query_set, QueryError};
use crate::scene::{synthesize_scene, SceneError, SceneSpec};
use crate::yamaguchi::{decompose_raster, ComponentStack};

const CHANNEL_NAMES: [&str; 8] = ["re_hh", "im_hh", "re_hv", "im_hv", "re_vh", "im_vh", "re_vv", "im_vv"];

#[derive(Debug, Parser)]
#[command(name = "polsar", version, about = "PolSAR decomposition and scattering-query pretraining")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the demo scene as a CPXR raster.
    Synth,
    /// Convert between a CPXR raster and an 8-plane f64 stack.
    Convert {
        #[arg(long)]
        input: PathBuf,
    },
    /// Total power per pixel.
    Span {
        #[arg(long)]
        input: PathBuf,
    },
    /// Boxcar coherency and Yamaguchi four-component decomposition.
    Decompose {
        #[arg(long)]
        input: PathBuf,
    },
    /// Rayleigh median binarization of a component stack.
    Labels {
        #[arg(long)]
        input: PathBuf,
    },
    /// Scattering query initialization and independence report.
    Queries {
        #[command(subcommand)]
        action: QueriesAction,
    },
    /// Train on a raster and its label stack.
    Pretrain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Score a checkpoint against a raster and its label stack.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// RGB composite of a raster (pauli) or component stack (yamaguchi).
    Composite {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
    },
}

#[derive(Debug, Subcommand)]
enum QueriesAction {
    /// Write the query set for the configured seed and sample count.
    Init,
    /// Pairwise cosine report of a query set (the shipped set if no input).
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Pauli,
    Yamaguchi,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Pretrain(#[from] PretrainError),
    #[error(transparent)]
    Polsar(#[from] PolsarError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("invalid input: {0}")]
    Input(String),
}

impl CliError {
    /// Process exit code; also reported in the JSON error object.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(e) => e.code(),
            CliError::Pretrain(PretrainError::Diverged { .. }) => 21,
            CliError::Pretrain(_) => 20,
            CliError::Polsar(_) => 30,
            CliError::Scene(_) => 31,
            CliError::Query(_) => 32,
            CliError::Input(_) => 40,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(e) => e.kind(),
            CliError::Pretrain(PretrainError::Diverged { .. }) => "diverged",
            CliError::Pretrain(_) => "pretrain",
            CliError::Polsar(_) => "polsar",
            CliError::Scene(_) => "scene",
            CliError::Query(_) => "queries",
            CliError::Input(_) => "input",
        }
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "code": e.code(), "message": e.to_string() }));
            e.code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl Ctx {
    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        Ok(self.manifest.add_input(path)?)
    }

    fn output(&mut self, name: &str) -> Result<(), CliError> {
        Ok(self.manifest.add_output(&self.out, name)?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(IoError::from)?;
        bytes.push(b'\n');
        std::fs::write(self.path(name), bytes).map_err(|source| IoError::Io { path: self.path(name), source })?;
        self.output(name)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth => "synth",
        Command::Convert { .. } => "convert",
        Command::Span { .. } => "span",
        Command::Decompose { .. } => "decompose",
        Command::Labels { .. } => "labels",
        Command::Queries { action: QueriesAction::Init } => "queries-init",
        Command::Queries { action: QueriesAction::Report { .. } } => "queries-report",
        Command::Pretrain { .. } => "pretrain",
        Command::Eval { .. } => "eval",
        Command::Composite { .. } => "composite",
    }
}

fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    let out = cli.common.out.clone();
    std::fs::create_dir_all(&out).map_err(|source| IoError::Io { path: out.clone(), source })?;
    let name = command_name(&cli.command);
    let mut ctx = Ctx { manifest: RunManifest::new(name, cfg.seed, cfg.hash()), cfg, out };
    if let Some(p) = &cli.common.config {
        ctx.input(p)?;
    }
    let mut summary = match &cli.command {
        Command::Synth => synth(&mut ctx)?,
        Command::Convert { input } => convert(&mut ctx, input)?,
        Command::Span { input } => span(&mut ctx, input)?,
        Command::Decompose { input } => decompose(&mut ctx, input)?,
        Command::Labels { input } => labels(&mut ctx, input)?,
        Command::Queries { action } => queries(&mut ctx, action)?,
        Command::Pretrain { input, labels } => pretrain_cmd(&mut ctx, input, labels)?,
        Command::Eval { checkpoint, input, labels } => eval(&mut ctx, checkpoint, input, labels)?,
        Command::Composite { input, mode } => composite(&mut ctx, input, *mode)?,
    };
    let manifest_name = ctx.manifest.finish(&ctx.out)?;
    summary["command"] = json!(name);
    summary["manifest"] = json!(manifest_name);
    Ok(summary)
}

fn read_raster(ctx: &mut Ctx, path: &Path) -> Result<PolsarRaster, CliError> {
    ctx.input(path)?;
    Ok(io::read_cpxr(path)?)
}

fn read_stack(ctx: &mut Ctx, path: &Path) -> Result<PlaneStack, CliError> {
    ctx.input(path)?;
    Ok(io::read_planes(path)?)
}

fn synth(ctx: &mut Ctx) -> Result<serde_json::Value, CliError> {
    let spec = SceneSpec::demo(ctx.cfg.height, ctx.cfg.width);
    let raster = synthesize_scene(&spec, ctx.cfg.seed)?;
    io::write_cpxr(&raster, &ctx.path("scene.cpxr"))?;
    ctx.output("scene.cpxr")?;
    Ok(json!({ "outputs": ["scene.cpxr"], "height": raster.height(), "width": raster.width() }))
}

fn convert(ctx: &mut Ctx, input: &Path) -> Result<serde_json::Value, CliError> {
    ctx.input(input)?;
    let bytes = std::fs::read(input).map_err(|source| IoError::Io { path: input.to_path_buf(), source })?;
    if bytes.starts_with(io::cpxr::MAGIC) {
        let raster = io::cpxr::decode_cpxr(&bytes)?;
        let planes = raster
            .to_planes()
            .into_iter()
            .map(|p| Grid::from_vec(raster.height(), raster.width(), p).expect("sized"))
            .collect();
        io::write_planes(&PlaneStack::f64(CHANNEL_NAMES, planes), &ctx.path("raster.plns"))?;
        ctx.output("raster.plns")?;
        Ok(json!({ "outputs": ["raster.plns"] }))
    } else {
        let stack = io::planes::decode_planes(&bytes)?;
        let planes = stack
            .as_f64()
            .filter(|p| p.len() == 8)
            .ok_or_else(|| CliError::Input("expected a CPXR raster or an 8-plane f64 stack".into()))?;
        let (h, w) = (planes[0].height(), planes[0].width());
        let pixels = (0..h * w)
            .map(|i| {
                let c = |k: usize| {
                    num_complex::Complex64::new(planes[2 * k].as_slice()[i], planes[2 * k + 1].as_slice()[i])
                };
                ScatteringMatrix::from_channels([c(0), c(1), c(2), c(3)])
            })
            .collect();
        let raster = PolsarRaster::new(h, w, pixels, RasterMetadata::default())?;
        io::write_cpxr(&raster, &ctx.path("raster.cpxr"))?;
        ctx.output("raster.cpxr")?;
        Ok(json!({ "outputs": ["raster.cpxr"] }))
    }
}

fn span(ctx: &mut Ctx, input: &Path) -> Result<serde_json::Value, CliError> {
    let raster = read_raster(ctx, input)?;
    let s = span_raster(&raster);
    let mean = s.iter().sum::<f64>() / s.len().max(1) as f64;
    io::write_planes(&PlaneStack::f64(["span"], vec![s]), &ctx.path("span.plns"))?;
    ctx.output("span.plns")?;
    Ok(json!({ "outputs": ["span.plns"], "mean_span": mean }))
}

fn decompose(ctx: &mut Ctx, input: &Path) -> Result<serde_json::Value, CliError> {
    let raster = read_raster(ctx, input)?;
    let t = boxcar_coherency(&raster, ctx.cfg.window)?;
    let (stack, stats) = decompose_raster(&t);
    io::write_planes(&PlaneStack::f64(ComponentStack::NAMES, stack.planes.to_vec()), &ctx.path("components.plns"))?;
    ctx.output("components.plns")?;
    let stats = serde_json::to_value(stats).map_err(IoError::from)?;
    ctx.write_json("decomposition.json", &json!({ "window": ctx.cfg.window, "stats": stats }))?;
    Ok(json!({ "outputs": ["components.plns", "decomposition.json"], "stats": stats }))
}

fn labels(ctx: &mut Ctx, input: &Path) -> Result<serde_json::Value, CliError> {
    let stack = read_stack(ctx, input)?;
    let planes = stack
        .as_f64()
        .filter(|p| p.len() == 4)
        .ok_or_else(|| CliError::Input("expected a 4-plane f64 component stack".into()))?;
    let comps = ComponentStack::new(planes.to_vec().try_into().expect("four planes"))
        .ok_or_else(|| CliError::Input("component planes differ in size".into()))?;
    let labels = generate_labels(&comps);
    io::write_planes(&PlaneStack::u8(ComponentStack::NAMES, labels.masks.to_vec()), &ctx.path("labels.plns"))?;
    ctx.output("labels.plns")?;
    let stats = serde_json::to_value(&labels.stats).map_err(IoError::from)?;
    ctx.write_json("labels.json", &json!({ "components": stats }))?;
    Ok(json!({ "outputs": ["labels.plns", "labels.json"] }))
}

fn queries(ctx: &mut Ctx, action: &QueriesAction) -> Result<serde_json::Value, CliError> {
    match action {
        QueriesAction::Init => {
            let qs = query_set(ctx.cfg.queries_m, ctx.cfg.seed)?;
            io::write_queries(&qs, &ctx.path("queries.sqry"))?;
            ctx.output("queries.sqry")?;
            let report = independence_report(&qs)?;
            Ok(json!({
                "outputs": ["queries.sqry"],
                "m": ctx.cfg.queries_m,
                "max_off_diagonal": report.max_off_diagonal,
                "independent": report.independent,
            }))
        }
        QueriesAction::Report { input } => {
            let qs = match input {
                Some(p) => {
                    ctx.input(p)?;
                    io::read_queries(p)?
                }
                None => crate::queries::shipped_queries(),
            };
            let report = independence_report(&qs)?;
            let value = serde_json::to_value(&report).map_err(IoError::from)?;
            ctx.write_json("queries_report.json", &value)?;
            Ok(json!({
                "outputs": ["queries_report.json"],
                "max_off_diagonal": report.max_off_diagonal,
                "independent": report.independent,
            }))
        }
    }
}

fn training_scene(ctx: &mut Ctx, input: &Path, labels: &Path) -> Result<TrainingScene, CliError> {
    let raster = read_raster(ctx, input)?;
    let stack = read_stack(ctx, labels)?;
    let masks = stack
        .as_u8()
        .filter(|m| m.len() == 4)
        .ok_or_else(|| CliError::Input("expected a 4-plane u8 label stack".into()))?;
    let label_stack = crate::labels::BinaryLabelStack {
        masks: masks.to_vec().try_into().expect("four masks"),
        stats: std::array::from_fn(|k| crate::labels::ComponentLabelStats {
            name: ComponentStack::NAMES[k].into(),
            fit: None,
            threshold: None,
            positive_fraction: 0.0,
            warning: None,
        }),
    };
    Ok(TrainingScene::new(&raster, &label_stack, ctx.cfg.patch)?)
}

fn pretrain_cmd(ctx: &mut Ctx, input: &Path, labels: &Path) -> Result<serde_json::Value, CliError> {
    let scene = training_scene(ctx, input, labels)?;
    let cfg = ctx.cfg.clone();
    let outcome = pretrain::train(std::slice::from_ref(&scene), cfg.encoder(), cfg.decoder(), &cfg.train())?;
    let (blob, json_name) = io::save_checkpoint(&outcome.params, &ctx.out, "model")?;
    ctx.output(&blob)?;
    ctx.output(&json_name)?;
    io::write_loss_csv(&outcome.trace, &ctx.path("loss.csv"))?;
    ctx.output("loss.csv")?;
    let first = outcome.trace.first().map(|r| r.total);
    let last = outcome.trace.last().map(|r| r.total);
    Ok(json!({
        "outputs": [blob, json_name, "loss.csv"],
        "iterations": outcome.trace.len(),
        "first_loss": first,
        "final_loss": last,
    }))
}

fn eval(ctx: &mut Ctx, checkpoint: &Path, input: &Path, labels: &Path) -> Result<serde_json::Value, CliError> {
    ctx.input(checkpoint)?;
    let params = io::load_checkpoint(checkpoint)?;
    ctx.cfg.patch = params.encoder.patch;
    let scene = training_scene(ctx, input, labels)?;
    let metrics = pretrain::evaluate(&params, std::slice::from_ref(&scene))?;
    let value = serde_json::to_value(&metrics).map_err(IoError::from)?;
    ctx.write_json("metrics.json", &value)?;
    Ok(json!({ "outputs": ["metrics.json"], "metrics": value }))
}

fn composite(ctx: &mut Ctx, input: &Path, mode: Mode) -> Result<serde_json::Value, CliError> {
    let image = match mode {
        Mode::Pauli => {
            let raster = read_raster(ctx, input)?;
            io::emit_composite(CompositeSource::Raster(&raster), CompositeMode::Pauli)?
        }
        Mode::Yamaguchi => {
            let stack = read_stack(ctx, input)?;
            let planes = stack
                .as_f64()
                .filter(|p| p.len() == 4)
                .ok_or_else(|| CliError::Input("expected a 4-plane f64 component stack".into()))?;
            let comps = ComponentStack::new(planes.to_vec().try_into().expect("four planes"))
                .ok_or_else(|| CliError::Input("component planes differ in size".into()))?;
            io::emit_composite(CompositeSource::Stack(&comps), CompositeMode::Yamaguchi)?
        }
    };
    let name = match mode {
        Mode::Pauli => "pauli.ppm",
        Mode::Yamaguchi => "yamaguchi.ppm",
    };
    image.write_ppm(&ctx.path(name))?;
    ctx.output(name)?;
    Ok(json!({ "outputs": [name], "height": image.height, "width": image.width }))
}
