//! `elastic-lens`: model validation, foliation checks, ray tracing, elastic
//! simulation, arrival extraction and travel-time inversion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;
mod stage;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use elastic_lens::model::Mode;

use commands::extract::{ExtractConfig, ExtractReport};
use commands::foliation::FoliationConfig;
use commands::invert::{CompareConfig, CurveGeometry, InvertConfig};
use commands::pipeline::PipelineConfig;
use commands::rays::{LensConfig, TraceConfig};
use commands::simulate::SimulateConfig;
use commands::{load_model, print_json};
use config::{parse_mode, parse_pair, required, ReceiverSpec, SourceSpec};
use manifest::{sidecar, write_text, ManifestBuilder};
use stage::{Stage, StageExt};
use validate::ValidateSampling;

#[derive(Parser)]
#[command(name = "elastic-lens", version, about = "Lens data and speed recovery for isotropic elastic media")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "ELASTIC_LENS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file for positivity, smoothness and c_p > c_s.
    Validate(ValidateArgs),
    /// Check strict convexity of a foliation for the model metric.
    CheckFoliation(FoliationArgs),
    /// Trace one ray from a boundary point.
    Trace(TraceArgs),
    /// Tabulate the lens relation over boundary points and angles.
    Lens(LensArgs),
    /// Run the boundary-source elastic simulation and record tractions.
    Simulate(SimulateArgs),
    /// Pick P and S arrivals from traces and compare with lens tables.
    Extract(ExtractArgs),
    /// Recover a speed profile from a travel-time curve.
    Invert(InvertArgs),
    /// Compare a recovered profile with a model.
    Compare(CompareArgs),
    /// Run the configured stages end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize)]
struct ValidateArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    lattice: Option<usize>,
    #[arg(long)]
    lattice_3d: Option<usize>,
    #[arg(long)]
    samples_per_cell: Option<usize>,
    #[arg(long)]
    max_node_jump: Option<f64>,
    /// Report file; printed only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValidateConfig {
    model: Option<PathBuf>,
    lattice: usize,
    lattice_3d: usize,
    samples_per_cell: usize,
    max_node_jump: f64,
    out: Option<PathBuf>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        let s = ValidateSampling::default();
        Self {
            model: None,
            lattice: s.lattice,
            lattice_3d: s.lattice_3d,
            samples_per_cell: s.samples_per_cell,
            max_node_jump: s.max_node_jump,
            out: None,
        }
    }
}

#[derive(Args, Serialize)]
struct FoliationArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// spheres, planes or kappa:<file>.
    #[arg(long)]
    foliation: Option<String>,
    #[arg(long, value_parser = parse_pair)]
    range: Option<[f64; 2]>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    axis: Option<usize>,
    #[arg(long)]
    leaves: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TraceArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    angle: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    min_angle_deg: Option<f64>,
    /// Path CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct LensArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    fan: Option<f64>,
    #[arg(long, value_parser = parse_pair)]
    arc: Option<[f64; 2]>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    min_angle_deg: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// e.g. edge=left,center=0.5,width=0.1,f0=20,pol=0.6,0.8
    #[arg(long)]
    source: Option<SourceSpec>,
    /// e.g. edge=right,count=16
    #[arg(long)]
    receivers: Option<ReceiverSpec>,
    #[arg(long)]
    h: Option<f64>,
    /// Run length.
    #[arg(long = "T", alias = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    courant: Option<f64>,
    #[arg(long)]
    run_margin: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Simulation output directory.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// P lens table.
    #[arg(long)]
    lens: Option<PathBuf>,
    /// S lens table.
    #[arg(long)]
    lens_s: Option<PathBuf>,
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    support_level: Option<f64>,
    #[arg(long)]
    ambiguity_periods: Option<f64>,
    #[arg(long)]
    separation_periods: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct InvertArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Disk radius.
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<CurveGeometry>,
    #[arg(long)]
    top_speed: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve<C>(file: &Option<PathBuf>, flags: &impl Serialize) -> anyhow::Result<C>
where
    C: Default + Serialize + serde::de::DeserializeOwned,
{
    config::resolve(file.as_deref(), flags).stage(Stage::Config)
}

fn input_path(v: &Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    required(v, name).stage(Stage::Config).cloned()
}

/// Writes `text` to `out` with a sidecar manifest, or prints it.
fn emit(out: Option<&Path>, text: &str, manifest: ManifestBuilder, config: &impl Serialize) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            write_text(path, text)?;
            manifest.finish(config, &sidecar(path))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(value: &impl Serialize) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn run_validate(args: &ValidateArgs) -> anyhow::Result<()> {
    let cfg: ValidateConfig = resolve(&args.config, args)?;
    let path = input_path(&cfg.model, "model")?;
    let mut m = ManifestBuilder::start("validate");
    m.input(&path);
    let sampling = ValidateSampling {
        lattice: cfg.lattice,
        lattice_3d: cfg.lattice_3d,
        samples_per_cell: cfg.samples_per_cell,
        max_node_jump: cfg.max_node_jump,
    };
    let report = validate::validate_file(&path, &sampling).stage(Stage::Model)?;
    emit(cfg.out.as_deref(), &json_text(&report)?, m, &cfg)?;
    if !report.passed {
        anyhow::bail!(Stage::Model);
    }
    Ok(())
}

fn run_foliation(args: &FoliationArgs) -> anyhow::Result<()> {
    let cfg: FoliationConfig = resolve(&args.config, args)?;
    let path = input_path(&cfg.model, "model")?;
    let mut m = ManifestBuilder::start("check-foliation");
    m.input(&path);
    if let Some(k) = commands::foliation::kappa_file(&cfg) {
        m.input(&k);
    }
    let model = load_model(&path)?;
    let report = commands::foliation::run(&model, &cfg)?;
    emit(cfg.out.as_deref(), &json_text(&report)?, m, &cfg)?;
    commands::foliation::require_convex(&report)
}

fn run_trace(args: &TraceArgs) -> anyhow::Result<()> {
    let cfg: TraceConfig = resolve(&args.config, args)?;
    let path = input_path(&cfg.model, "model")?;
    let mut m = ManifestBuilder::start("trace");
    m.input(&path);
    let model = load_model(&path)?;
    let output = commands::rays::trace(&model, &cfg)?;
    if let Some(out) = &cfg.out {
        write_text(out, &output.path_csv())?;
        m.finish(&cfg, &sidecar(out))?;
    }
    print_json(&output)
}

fn run_lens(args: &LensArgs) -> anyhow::Result<()> {
    let cfg: LensConfig = resolve(&args.config, args)?;
    let path = input_path(&cfg.model, "model")?;
    let out = input_path(&cfg.out, "out")?;
    let mut m = ManifestBuilder::start("lens");
    m.input(&path);
    let model = load_model(&path)?;
    let table = commands::rays::lens(&model, &cfg)?;
    write_text(&out, &table.to_csv().stage(Stage::Model)?)?;
    m.finish(&cfg, &sidecar(&out))?;
    print_json(&commands::rays::summarize(&table))
}

fn run_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg: SimulateConfig = resolve(&args.config, args)?;
    let path = input_path(&cfg.model, "model")?;
    let out = input_path(&cfg.out, "out")?;
    let mut m = ManifestBuilder::start("simulate");
    m.input(&path);
    let model = load_model(&path)?;
    let (run, meta) = commands::simulate::run(&model, &cfg)?;
    commands::simulate::write(&out, &run, &meta)?;
    m.finish(&cfg, &out.join("manifest.json"))?;
    print_json(&serde_json::json!({
        "grid": [meta.grid.nx, meta.grid.ny],
        "dt": meta.dt,
        "steps": meta.steps,
        "cfl": meta.cfl,
        "receivers": meta.receivers.len(),
    }))
}

fn run_extract(args: &ExtractArgs) -> anyhow::Result<()> {
    let cfg: ExtractConfig = resolve(&args.config, args)?;
    let dir = input_path(&cfg.traces, "traces")?;
    let mut m = ManifestBuilder::start("extract");
    let (meta, traces, files) = commands::simulate::read(&dir).stage(Stage::Extraction)?;
    files.iter().for_each(|f| m.input(f));
    let mut table = |p: &Option<PathBuf>| -> anyhow::Result<_> {
        p.as_ref()
            .map(|p| {
                m.input(p);
                commands::extract::read_table(p, &meta.domain).stage(Stage::Extraction)
            })
            .transpose()
    };
    let lens_p = table(&cfg.lens)?;
    let lens_s = table(&cfg.lens_s)?;
    let summary = commands::extract::run(&meta, &traces, lens_p.as_ref(), lens_s.as_ref(), &cfg)?;
    emit(cfg.out.as_deref(), &summary.to_csv(), m, &cfg)?;
    if cfg.out.is_some() {
        print_json(&ExtractReport::from(&summary))?;
    }
    Ok(())
}

fn run_invert(args: &InvertArgs) -> anyhow::Result<()> {
    let cfg: InvertConfig = resolve(&args.config, args)?;
    let mut m = ManifestBuilder::start("invert");
    m.input(&input_path(&cfg.curve, "curve")?);
    let profile = commands::invert::invert(&cfg)?;
    emit(cfg.out.as_deref(), &profile.to_csv(), m, &cfg)
}

fn run_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let cfg: CompareConfig = resolve(&args.config, args)?;
    let profile_path = input_path(&cfg.profile, "profile")?;
    let truth_path = input_path(&cfg.truth, "truth")?;
    let mut m = ManifestBuilder::start("compare");
    m.input(&profile_path);
    m.input(&truth_path);
    let text = std::fs::read_to_string(&profile_path)
        .with_context(|| format!("reading {}", profile_path.display()))
        .stage(Stage::Config)?;
    let profile = elastic_lens::inversion::Profile::from_csv(&text).stage(Stage::Config)?;
    let truth = load_model(&truth_path)?;
    let report = commands::invert::compare_with(&profile, &truth, cfg.mode)?;
    emit(cfg.out.as_deref(), &json_text(&report)?, m, &cfg)
}

fn run_pipeline(args: &PipelineArgs) -> anyhow::Result<()> {
    let cfg: PipelineConfig = resolve(&args.config, args)?;
    let mut m = ManifestBuilder::start("pipeline");
    if let Some(c) = &args.config {
        m.input(c);
    }
    let result = commands::pipeline::run(&cfg, &mut m);
    if let Some(out) = &cfg.out {
        m.finish(&cfg, &out.join("manifest.json"))?;
    }
    result
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    match &cli.command {
        Command::Validate(a) => run_validate(a),
        Command::CheckFoliation(a) => run_foliation(a),
        Command::Trace(a) => run_trace(a),
        Command::Lens(a) => run_lens(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Extract(a) => run_extract(a),
        Command::Invert(a) => run_invert(a),
        Command::Compare(a) => run_compare(a),
        Command::Pipeline(a) => run_pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(stage::exit_code(&e))
        }
    }
}
