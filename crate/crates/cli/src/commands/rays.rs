use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use elastic_lens::model::{Mode, Model};
use elastic_lens::ray::{
    entry_direction, integrate_bicharacteristic, lens_table, scattering_relation, BoundarySampling, LensRecord,
    LensTable, PhasePoint, RayConfig,
};

use crate::stage::{Stage, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub model: Option<PathBuf>,
    pub mode: Option<Mode>,
    /// Boundary arclength of the entry point.
    pub s: Option<f64>,
    /// Entry angle from the inward normal, counter-clockwise, in radians.
    pub angle: f64,
    pub dt: f64,
    pub tmax: f64,
    /// Entries closer than this to the tangent are refused (degrees).
    pub min_angle_deg: f64,
    pub out: Option<PathBuf>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        let r = RayConfig::default();
        Self {
            model: None,
            mode: None,
            s: None,
            angle: 0.0,
            dt: r.dt,
            tmax: r.t_max,
            min_angle_deg: r.min_angle_deg,
            out: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TraceOutput {
    pub record: LensRecord<2>,
    /// Phase points from entry to exit (or to `tmax`).
    #[serde(skip)]
    pub path: Vec<PhasePoint<2>>,
}

impl TraceOutput {
    /// CSV with header `t,x,y,xi_x,xi_y`.
    pub fn path_csv(&self) -> String {
        let mut out = String::from("t,x,y,xi_x,xi_y\n");
        for p in &self.path {
            writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", p.t, p.x[0], p.x[1], p.xi[0], p.xi[1])
                .expect("string write");
        }
        if let Some(exit) = self.record.exit {
            let (t, x) = (self.record.ell.unwrap_or(f64::NAN), exit.x);
            let xi = self.path.last().map_or([f64::NAN; 2], |p| p.xi);
            writeln!(out, "{t:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", x[0], x[1], xi[0], xi[1]).expect("string write");
        }
        out
    }
}

pub fn trace(model: &Model, cfg: &TraceConfig) -> anyhow::Result<TraceOutput> {
    let speed = model.speed_for(cfg.mode).stage(Stage::Config)?;
    let s = cfg.s.ok_or_else(|| anyhow!("trace needs an entry parameter s")).stage(Stage::Config)?;
    let rc = RayConfig { dt: cfg.dt, t_max: cfg.tmax, min_angle_deg: cfg.min_angle_deg, ..RayConfig::default() };
    let entry = entry_direction(&model.domain, s, cfg.angle).stage(Stage::Model)?;
    let record = scattering_relation(&speed, &model.domain, &entry, &rc).stage(Stage::Model)?;
    let path = if record.exit.is_some() || matches!(record.status, elastic_lens::ray::LensStatus::Trapped { .. }) {
        let start = PhasePoint::launch(&speed, entry.x, entry.v).stage(Stage::Model)?;
        // whole steps strictly inside the domain; the exit point closes the path
        let horizon = record.ell.unwrap_or(cfg.tmax);
        let steps = ((horizon / cfg.dt) * (1.0 - 1e-12)).floor();
        if steps >= 1.0 {
            integrate_bicharacteristic(&speed, start, steps * cfg.dt, cfg.dt, rc.max_steps).stage(Stage::Model)?
        } else {
            vec![start]
        }
    } else {
        Vec::new()
    };
    Ok(TraceOutput { record, path })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensConfig {
    pub model: Option<PathBuf>,
    pub mode: Option<Mode>,
    /// Boundary points.
    pub points: usize,
    /// Entry angles per point, spread over the fan.
    pub angles: usize,
    /// Fan half-width from the inward normal (degrees).
    pub fan: f64,
    /// Boundary arclength range sampled; the whole boundary when absent.
    pub arc: Option<[f64; 2]>,
    pub tmax: f64,
    pub dt: f64,
    pub min_angle_deg: f64,
    pub out: Option<PathBuf>,
}

impl Default for LensConfig {
    fn default() -> Self {
        let r = RayConfig::default();
        let b = BoundarySampling::new(64, 33);
        Self {
            model: None,
            mode: None,
            points: b.points,
            angles: b.angles,
            fan: b.fan_half_width_deg,
            arc: None,
            tmax: r.t_max,
            dt: r.dt,
            min_angle_deg: r.min_angle_deg,
            out: None,
        }
    }
}

impl LensConfig {
    pub fn ray_config(&self) -> RayConfig {
        RayConfig { dt: self.dt, t_max: self.tmax, min_angle_deg: self.min_angle_deg, ..RayConfig::default() }
    }
}

#[derive(Debug, Serialize)]
pub struct LensSummary {
    pub rows: usize,
    pub exited: usize,
    pub trapped: usize,
    pub tangent_entry: usize,
    pub max_ell: Option<f64>,
}

pub fn summarize(table: &LensTable) -> LensSummary {
    LensSummary {
        rows: table.rows.len(),
        exited: table.count("exited"),
        trapped: table.count("trapped"),
        tangent_entry: table.count("tangent_entry"),
        max_ell: table.max_ell(),
    }
}

pub fn lens(model: &Model, cfg: &LensConfig) -> anyhow::Result<LensTable> {
    let speed = model.speed_for(cfg.mode).stage(Stage::Config)?;
    let sampling = BoundarySampling { points: cfg.points, angles: cfg.angles, fan_half_width_deg: cfg.fan, arc: cfg.arc };
    lens_table(&speed, &model.domain, &sampling, &cfg.ray_config()).stage(Stage::Model)
}
