use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use elastic_lens::convexity::{
    check_foliation, check_plane_foliation, ConvexityReport, Foliation, LevelFunction, Sampling,
};
use elastic_lens::model::{Domain, Mode, Model};

use crate::stage::{Stage, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoliationConfig {
    pub model: Option<PathBuf>,
    /// `spheres`, `planes` or `kappa:<file>` (a level function or a full
    /// foliation in JSON).
    pub foliation: String,
    /// Leaf parameter range. Spheres default to `[0.05 R, R]` on a disk,
    /// planes to the box extent along `axis`.
    pub range: Option<[f64; 2]>,
    /// Dimension of the check, 2 or 3.
    pub dim: usize,
    /// Wave mode of a material model; the model speed when absent.
    pub mode: Option<Mode>,
    /// Plane normal axis; the last axis when absent.
    pub axis: Option<usize>,
    pub leaves: usize,
    pub points: usize,
    pub directions: usize,
    pub out: Option<PathBuf>,
}

impl Default for FoliationConfig {
    fn default() -> Self {
        let s = Sampling::default();
        Self {
            model: None,
            foliation: "spheres".into(),
            range: None,
            dim: 2,
            mode: None,
            axis: None,
            leaves: s.leaves,
            points: s.points,
            directions: s.directions,
            out: None,
        }
    }
}

enum Kind {
    Spheres,
    Planes,
    Kappa(Foliation),
}

fn kind(cfg: &FoliationConfig) -> anyhow::Result<Kind> {
    Ok(match cfg.foliation.as_str() {
        "spheres" => Kind::Spheres,
        "planes" => Kind::Planes,
        other => {
            let Some(path) = other.strip_prefix("kappa:") else {
                bail!("foliation must be spheres, planes or kappa:<file>, got '{other}'");
            };
            let text = std::fs::read_to_string(path).with_context(|| format!("reading level function {path}"))?;
            let foliation = match serde_json::from_str::<Foliation>(&text) {
                Ok(f) => f,
                Err(_) => {
                    let kappa = LevelFunction::from_json(&text).with_context(|| format!("parsing {path}"))?;
                    let range = cfg.range.ok_or_else(|| anyhow!("a level function needs a range"))?;
                    Foliation::new(kappa, range)
                }
            };
            Kind::Kappa(foliation)
        }
    })
}

/// Extra file read by the check, for the manifest.
pub fn kappa_file(cfg: &FoliationConfig) -> Option<PathBuf> {
    cfg.foliation.strip_prefix("kappa:").map(PathBuf::from)
}

fn domain_dim(domain: &Domain) -> Option<usize> {
    match domain {
        Domain::Disk { .. } => None,
        Domain::Box { lo, .. } => Some(lo.len()),
    }
}

pub fn run(model: &Model, cfg: &FoliationConfig) -> anyhow::Result<ConvexityReport> {
    let speed = model.speed_for(cfg.mode).stage(Stage::Config)?;
    let domain = &model.domain;
    if !(2..=3).contains(&cfg.dim) || domain_dim(domain).is_some_and(|d| d != cfg.dim) {
        return Err(anyhow!("dimension {} does not fit the model domain", cfg.dim)).stage(Stage::Config);
    }
    let samples = Sampling { leaves: cfg.leaves, points: cfg.points, directions: cfg.directions };
    let kind = kind(cfg).stage(Stage::Config)?;
    let report = match (kind, cfg.dim) {
        (Kind::Planes, d) => {
            let axis = cfg.axis.unwrap_or(d - 1);
            let [a, b] = match (cfg.range, domain) {
                (Some(r), _) => r,
                (None, Domain::Box { lo, hi }) if axis < lo.len() => [lo[axis], hi[axis]],
                _ => return Err(anyhow!("planes need a range on this domain")).stage(Stage::Config),
            };
            match d {
                2 => check_plane_foliation::<2>(&speed, axis, a, b, domain, &samples),
                _ => check_plane_foliation::<3>(&speed, axis, a, b, domain, &samples),
            }
        }
        (k, d) => {
            let foliation = match k {
                Kind::Kappa(f) => f,
                _ => {
                    let [a, b] = match (cfg.range, domain) {
                        (Some(r), _) => r,
                        (None, Domain::Disk { radius }) => [0.05 * radius, *radius],
                        _ => return Err(anyhow!("spheres need a range on a box domain")).stage(Stage::Config),
                    };
                    Foliation::spheres(a, b)
                }
            };
            match d {
                2 => check_foliation::<2>(&speed, &foliation, domain, &samples),
                _ => check_foliation::<3>(&speed, &foliation, domain, &samples),
            }
        }
    };
    report.stage(Stage::Foliation)
}

/// Fails with the foliation status unless the report is strictly convex.
pub fn require_convex(report: &ConvexityReport) -> anyhow::Result<()> {
    if report.is_strictly_convex() {
        return Ok(());
    }
    let witness = report
        .witnesses
        .first()
        .map(|w| format!("; value {:e} at {:?} on leaf {}", w.value, w.point, w.leaf))
        .unwrap_or_default();
    Err(anyhow!("foliation is not strictly convex: verdict {:?}, margin {:e}{witness}", report.verdict, report.margin))
        .stage(Stage::Foliation)
}
