//! Stage chain: validate → foliation → lens → simulate → extract → invert →
//! compare. Stages run when their section is present in the config; a
//! failure halts the chain with the stage's exit status.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use elastic_lens::inversion::{
    forward_travel_times, layered_travel_times, ray_parameter_fan, DepthProfile, Profile,
};
use elastic_lens::model::file::TableInterp;
use elastic_lens::model::{Domain, FieldSpec, Mode, Model};
use elastic_lens::ray::{LensTable, RayConfig};

use super::extract::{self, ExtractConfig, ExtractReport};
use super::foliation::{self, FoliationConfig};
use super::invert::{self, CurveGeometry, InvertConfig};
use super::rays::{self, LensConfig};
use super::simulate::{self, SimulateConfig};
use crate::manifest::{write_json, write_text, ManifestBuilder};
use crate::stage::{Stage, StageExt};
use crate::validate::{validate_spec, ValidateSampling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertStage {
    /// Travel-time curve to invert; synthesized from the model when absent.
    pub curve: Option<PathBuf>,
    /// Curve geometry; radial on a disk, layered on a box when absent.
    pub mode: Option<CurveGeometry>,
    /// Disk radius; the model's when absent.
    pub radius: Option<f64>,
    pub top_speed: Option<f64>,
    /// Wave mode of a material model; its speed when absent.
    pub wave: Option<Mode>,
    /// Rays of a synthesized curve.
    pub rays: usize,
    /// Turning speeds of the first synthesized layered rays relative to the
    /// surface speed, ahead of the evenly spaced ones.
    pub grazing: Vec<f64>,
    pub dt: f64,
    pub tmax: f64,
}

impl Default for InvertStage {
    fn default() -> Self {
        let r = RayConfig::default();
        Self {
            curve: None,
            mode: None,
            radius: None,
            top_speed: None,
            wave: None,
            rays: 64,
            grazing: vec![1.0005, 1.001],
            dt: r.dt,
            tmax: r.t_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
    pub validate: ValidateSampling,
    /// Stage sections; `model`, `out` and input paths inside them are set
    /// by the pipeline.
    pub foliation: Option<FoliationConfig>,
    pub lens: Option<LensConfig>,
    pub simulate: Option<SimulateConfig>,
    pub extract: Option<ExtractConfig>,
    pub invert: Option<InvertStage>,
}

#[derive(Debug, Serialize)]
struct StageRecord {
    stage: &'static str,
    status: &'static str,
    summary: Value,
}

#[derive(Debug, Serialize)]
struct PipelineReport {
    passed: bool,
    stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

struct Runner<'a> {
    out: &'a Path,
    records: Vec<StageRecord>,
}

impl Runner<'_> {
    fn done(&mut self, stage: &'static str, summary: Value) {
        self.records.push(StageRecord { stage, status: "ok", summary });
    }
}

fn lens_modes(model: &Model, cfg: &LensConfig) -> Vec<Option<Mode>> {
    match (cfg.mode, &model.material) {
        (Some(m), _) => vec![Some(m)],
        (None, Some(_)) => vec![Some(Mode::P), Some(Mode::S)],
        (None, None) => vec![None],
    }
}

fn lens_file(mode: Option<Mode>) -> String {
    match mode {
        Some(m) => format!("lens_{}.csv", m.as_str()),
        None => "lens.csv".into(),
    }
}

/// Synthetic curve of the model for the inversion stage.
fn synthesize(model: &Model, st: &InvertStage, geometry: CurveGeometry) -> anyhow::Result<String> {
    let speed = model.speed_for(st.wave).stage(Stage::Config)?;
    match geometry {
        CurveGeometry::Radial => {
            let radius = match (st.radius, &model.domain) {
                (Some(r), _) => r,
                (None, Domain::Disk { radius }) => *radius,
                _ => return Err(anyhow!("radial inversion needs a radius")).stage(Stage::Config),
            };
            let params = ray_parameter_fan(&speed, radius, st.rays).stage(Stage::Inversion)?;
            let curve = forward_travel_times(&speed, radius, &params, &RayConfig::new(st.dt, st.tmax))
                .stage(Stage::Inversion)?;
            Ok(curve.to_csv())
        }
        CurveGeometry::Layered => {
            let nodes = match &model.spec.speed {
                Some(FieldSpec::Depth { profile, interp: TableInterp::Linear }) => profile.clone(),
                _ => {
                    return Err(anyhow!("layered synthesis needs a piecewise-linear depth speed"))
                        .stage(Stage::Config)
                }
            };
            let truth = DepthProfile::new(nodes).stage(Stage::Config)?;
            let (c0, c1) = (truth.nodes[0][1], truth.nodes[truth.nodes.len() - 1][1]);
            let n = st.rays as f64;
            let params: Vec<f64> = st
                .grazing
                .iter()
                .map(|g| g * c0)
                .chain((0..st.rays).map(|k| c0 + (c1 - c0) * (k as f64 + 0.5) / n))
                .map(|c| 1.0 / c)
                .collect();
            Ok(layered_travel_times(&truth, &params).stage(Stage::Inversion)?.to_csv())
        }
    }
}

pub fn run(cfg: &PipelineConfig, manifest: &mut ManifestBuilder) -> anyhow::Result<()> {
    let model_path = crate::config::required(&cfg.model, "model").stage(Stage::Config)?.clone();
    let out = crate::config::required(&cfg.out, "out").stage(Stage::Config)?.clone();
    manifest.input(&model_path);
    let mut runner = Runner { out: &out, records: Vec::new() };
    let result = stages(cfg, &model_path, &mut runner, manifest);
    let report = PipelineReport {
        passed: result.is_ok(),
        stages: runner.records,
        failure: result.as_ref().err().map(|e| format!("{e:#}")),
    };
    write_json(&out.join("report.json"), &report)?;
    result
}

fn stages(
    cfg: &PipelineConfig,
    model_path: &Path,
    r: &mut Runner<'_>,
    manifest: &mut ManifestBuilder,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(model_path).stage(Stage::Model)?;
    let spec = serde_json::from_str(&text).stage(Stage::Model)?;
    let validation = validate_spec(spec, &cfg.validate);
    write_json(&r.out.join("validate.json"), &validation)?;
    if !validation.passed {
        let first = validation.findings.iter().find(|f| f.severity == crate::validate::Severity::Error);
        return Err(anyhow!("model failed validation: {}", first.map_or("", |f| f.message.as_str()))).stage(Stage::Model);
    }
    r.done("validate", json!({"errors": 0, "warnings": validation.warnings, "samples": validation.samples}));
    let model = super::load_model(model_path)?;

    if let Some(fc) = &cfg.foliation {
        if let Some(k) = foliation::kappa_file(fc) {
            manifest.input(&k);
        }
        let report = foliation::run(&model, fc)?;
        write_json(&r.out.join("foliation.json"), &report)?;
        foliation::require_convex(&report)?;
        r.done("foliation", json!({"verdict": report.verdict, "margin": report.margin}));
    }

    let mut tables: Vec<(Option<Mode>, LensTable)> = Vec::new();
    if let Some(lc) = &cfg.lens {
        let mut summary = serde_json::Map::new();
        for mode in lens_modes(&model, lc) {
            let table = rays::lens(&model, &LensConfig { mode, ..lc.clone() })?;
            let file = lens_file(mode);
            write_text(&r.out.join(&file), &table.to_csv().stage(Stage::Model)?)?;
            summary.insert(file, serde_json::to_value(rays::summarize(&table))?);
            tables.push((mode, table));
        }
        r.done("lens", Value::Object(summary));
    }

    if let Some(sc) = &cfg.simulate {
        let (run, meta) = simulate::run(&model, sc)?;
        simulate::write(r.out, &run, &meta)?;
        r.done(
            "simulate",
            json!({"grid": [meta.grid.nx, meta.grid.ny], "h": meta.grid.h, "dt": meta.dt, "steps": meta.steps, "cfl": meta.cfl}),
        );
        if let Some(ec) = &cfg.extract {
            let find = |m: Mode| tables.iter().find(|(k, _)| *k == Some(m)).map(|(_, t)| t);
            let summary = extract::run(&meta, &run.traces, find(Mode::P), find(Mode::S), ec)?;
            write_text(&r.out.join("extracted.csv"), &summary.to_csv())?;
            r.done("extract", serde_json::to_value(ExtractReport::from(&summary))?);
        }
    } else if cfg.extract.is_some() {
        return Err(anyhow!("the extract stage needs the simulate stage")).stage(Stage::Config);
    }

    if let Some(st) = &cfg.invert {
        let geometry = st.mode.unwrap_or(match model.domain {
            Domain::Disk { .. } => CurveGeometry::Radial,
            Domain::Box { .. } => CurveGeometry::Layered,
        });
        let curve = match &st.curve {
            Some(p) => {
                manifest.input(p);
                std::fs::read_to_string(p).stage(Stage::Config)?
            }
            None => synthesize(&model, st, geometry)?,
        };
        write_text(&r.out.join("curve.csv"), &curve)?;
        let radius = st.radius.or(match model.domain {
            Domain::Disk { radius } => Some(radius),
            _ => None,
        });
        let icfg = InvertConfig {
            curve: None,
            radius: radius.unwrap_or(InvertConfig::default().radius),
            mode: geometry,
            top_speed: st.top_speed,
            out: None,
        };
        let profile: Profile = invert::invert_text(&curve, &icfg)?;
        write_text(&r.out.join("profile.csv"), &profile.to_csv())?;
        let cmp = invert::compare_with(&profile, &model, st.wave)?;
        write_json(&r.out.join("compare.json"), &cmp)?;
        r.done(
            "invert",
            json!({"nodes": profile.nodes().len(), "max_rel_err": cmp.max_rel_err, "mean_rel_err": cmp.mean_rel_err}),
        );
    }
    Ok(())
}
