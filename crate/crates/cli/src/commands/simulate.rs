use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use elastic_lens::model::{Domain, Grid2D, Model};
use elastic_lens::sim::{simulate_dn, BoundarySource, DnRun, Edge, NodalMaterial, Receiver, SimConfig, TractionTrace};

use crate::config::{ReceiverSpec, SourceSpec};
use crate::manifest::{write_json, write_text};
use crate::stage::{Stage, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: Option<PathBuf>,
    pub source: Option<SourceSpec>,
    pub receivers: Option<ReceiverSpec>,
    /// Grid spacing.
    pub h: f64,
    /// Run length; when absent, the source delay plus two periods plus
    /// `run_margin` times the longest source-receiver distance over the
    /// smallest shear speed.
    pub t_end: Option<f64>,
    /// `dt = courant · h / max c_p`.
    pub courant: f64,
    pub run_margin: f64,
    /// Output directory.
    pub out: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: None,
            source: None,
            receivers: None,
            h: 0.005,
            t_end: None,
            courant: SimConfig::new(1.0, 1.0).courant,
            run_margin: 1.1,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverMeta {
    pub edge: Edge,
    pub s: f64,
    pub point: [f64; 2],
    pub file: String,
}

/// Metadata written next to the traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub domain: Domain,
    pub grid: Grid2D,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub max_cp: f64,
    pub min_cs: f64,
    pub source: BoundarySource,
    pub receivers: Vec<ReceiverMeta>,
}

pub const RUN_FILE: &str = "run.json";

pub fn source(spec: &SourceSpec) -> BoundarySource {
    let taper = spec.taper.unwrap_or(0.5 * spec.width);
    BoundarySource::new(spec.edge, spec.center, spec.width, taper, spec.f0, spec.pol)
}

pub fn receivers(spec: &ReceiverSpec, domain: &Domain) -> anyhow::Result<Vec<Receiver>> {
    let (lo, hi) = domain.bounds::<2>()?;
    let a = spec.edge.tangent_axis();
    let n = spec.count as f64;
    let from = spec.from.unwrap_or(lo[a] + (hi[a] - lo[a]) / (n + 1.0));
    let to = spec.to.unwrap_or(hi[a] - (hi[a] - lo[a]) / (n + 1.0));
    Ok(Receiver::along(spec.edge, spec.count, from, to))
}

pub fn run(model: &Model, cfg: &SimulateConfig) -> anyhow::Result<(DnRun, RunMeta)> {
    let material = model.material.as_ref().ok_or_else(|| anyhow!("simulation needs a material model")).stage(Stage::Config)?;
    let src = source(crate::config::required(&cfg.source, "source").stage(Stage::Config)?);
    let recv = receivers(crate::config::required(&cfg.receivers, "receivers").stage(Stage::Config)?, &model.domain)
        .stage(Stage::Config)?;
    let t_end = match cfg.t_end {
        Some(t) => t,
        None => {
            let grid = Grid2D::covering(&model.domain, cfg.h).stage(Stage::Simulation)?;
            let min_cs = NodalMaterial::sample(material, grid).stage(Stage::Simulation)?.min_cs();
            let centre = src.center_point(&model.domain).stage(Stage::Config)?;
            let far = recv
                .iter()
                .map(|r| r.point(&model.domain).map(|p| (p[0] - centre[0]).hypot(p[1] - centre[1])))
                .collect::<elastic_lens::Result<Vec<_>>>()
                .stage(Stage::Config)?
                .into_iter()
                .fold(0.0, f64::max);
            src.pulse.delay + 2.0 / src.pulse.f0 + cfg.run_margin * far / min_cs
        }
    };
    let sim = SimConfig { h: cfg.h, courant: cfg.courant, t_end, dt: None };
    let run = simulate_dn(material, &model.domain, &src, &recv, &sim).stage(Stage::Simulation)?;
    let meta = RunMeta {
        domain: model.domain.clone(),
        grid: run.grid,
        dt: run.dt,
        steps: run.steps,
        t_end,
        cfl: run.cfl,
        max_cp: run.max_cp,
        min_cs: run.min_cs,
        source: run.source,
        receivers: run
            .traces
            .iter()
            .enumerate()
            .map(|(k, t)| ReceiverMeta { edge: t.receiver.edge, s: t.receiver.s, point: t.point, file: trace_file(k) })
            .collect(),
    };
    Ok((run, meta))
}

fn trace_file(k: usize) -> String {
    format!("receiver_{k:03}.csv")
}

pub fn write(dir: &Path, run: &DnRun, meta: &RunMeta) -> anyhow::Result<()> {
    for (trace, r) in run.traces.iter().zip(&meta.receivers) {
        write_text(&dir.join(&r.file), &trace.to_csv())?;
    }
    write_json(&dir.join(RUN_FILE), meta)
}

/// Run metadata and traces from a simulation output directory, with the
/// files read.
pub fn read(dir: &Path) -> anyhow::Result<(RunMeta, Vec<TractionTrace>, Vec<PathBuf>)> {
    let run_path = dir.join(RUN_FILE);
    let text = std::fs::read_to_string(&run_path).with_context(|| format!("reading {}", run_path.display()))?;
    let meta: RunMeta = serde_json::from_str(&text).with_context(|| format!("parsing {}", run_path.display()))?;
    let mut files = vec![run_path];
    let traces = meta
        .receivers
        .iter()
        .map(|r| {
            let p = dir.join(&r.file);
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            files.push(p.clone());
            TractionTrace::from_csv(&text, Receiver::new(r.edge, r.s), r.point)
                .with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((meta, traces, files))
}
