//! Scattering relation and lens tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, SpeedField};
use crate::ray::flow::{arr, check_step, hamiltonian, rk4_step, PhasePoint, DEFAULT_MAX_STEPS};
use crate::vecn;

/// Integration settings for boundary-to-boundary rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Entries closer than this angle to the tangent plane are refused.
    pub min_angle_deg: f64,
    pub max_steps: usize,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 10.0,
            min_angle_deg: 2.0,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl RayConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self { dt, t_max, ..Self::default() }
    }
}

/// A boundary point with a Euclidean unit direction (inward for entries,
/// outward for exits). The metric-unit vector is `c(x) v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDirection<const D: usize> {
    #[serde(with = "arr")]
    pub x: [f64; D],
    #[serde(with = "arr")]
    pub v: [f64; D],
}

impl<const D: usize> BoundaryDirection<D> {
    pub fn new(x: [f64; D], v: [f64; D]) -> Self {
        Self { x, v }
    }

    /// The same point with the direction reversed.
    pub fn reversed(&self) -> Self {
        Self { x: self.x, v: vecn::scale(&self.v, -1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LensStatus {
    Exited,
    Trapped { t_max: f64 },
    TangentEntry,
}

impl LensStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LensStatus::Exited => "exited",
            LensStatus::Trapped { .. } => "trapped",
            LensStatus::TangentEntry => "tangent_entry",
        }
    }
}

/// One sample of the lens relation: entry, exit and travel time `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensRecord<const D: usize> {
    pub entry: BoundaryDirection<D>,
    pub exit: Option<BoundaryDirection<D>>,
    pub ell: Option<f64>,
    pub status: LensStatus,
    /// Largest relative deviation of H from ½ seen along the ray.
    pub max_h_drift: f64,
}

impl<const D: usize> LensRecord<D> {
    pub fn exited(&self) -> bool {
        self.status == LensStatus::Exited
    }
}

/// Traces the ray launched from `entry` until it leaves `domain`.
///
/// The crossing is located by bisection on the partial RK4 step so that the
/// exit point lies on the boundary to round-off, and the exit covector is
/// the one at the crossing.
pub fn scattering_relation<const D: usize>(
    speed: &SpeedField,
    domain: &Domain,
    entry: &BoundaryDirection<D>,
    cfg: &RayConfig,
) -> Result<LensRecord<D>> {
    let steps = check_step(cfg.dt, cfg.t_max, cfg.max_steps)?;
    let normal = domain.boundary_normal(&entry.x)?;
    let vnorm = vecn::norm(&entry.v);
    if (vnorm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("entry direction has length {vnorm}, expected 1")));
    }
    let mut record = LensRecord {
        entry: *entry,
        exit: None,
        ell: None,
        status: LensStatus::TangentEntry,
        max_h_drift: 0.0,
    };
    if vecn::dot(&entry.v, &normal) > -cfg.min_angle_deg.to_radians().sin() {
        return Ok(record);
    }

    let mut p = PhasePoint::launch(speed, entry.x, entry.v)?;
    let mut drift = 0.0f64;
    for k in 0..steps {
        let next = rk4_step(speed, &p, cfg.dt)?;
        let b_next = domain.signed_distance(&next.x)?;
        if b_next > 0.0 {
            let (s, at) = bisect_crossing(speed, domain, &p, cfg.dt)?;
            let ell = k as f64 * cfg.dt + s * cfg.dt;
            drift = drift.max(rel_drift(speed, &at)?);
            record.exit = Some(BoundaryDirection { x: at.x, v: at.direction() });
            record.ell = Some(ell);
            record.status = LensStatus::Exited;
            record.max_h_drift = drift;
            return Ok(record);
        }
        p = next;
        p.t = (k + 1) as f64 * cfg.dt;
        drift = drift.max(rel_drift(speed, &p)?);
    }
    record.status = LensStatus::Trapped { t_max: cfg.t_max };
    record.max_h_drift = drift;
    Ok(record)
}

fn rel_drift<const D: usize>(speed: &SpeedField, p: &PhasePoint<D>) -> Result<f64> {
    Ok((hamiltonian(speed, &p.x, &p.xi)? - 0.5).abs() / 0.5)
}

/// Fraction `s` of the step at which the ray crosses the boundary.
fn bisect_crossing<const D: usize>(
    speed: &SpeedField,
    domain: &Domain,
    p: &PhasePoint<D>,
    dt: f64,
) -> Result<(f64, PhasePoint<D>)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let q = rk4_step(speed, p, mid * dt)?;
        if domain.signed_distance(&q.x)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((s, rk4_step(speed, p, s * dt)?))
}

/// Entry and exit data from runs at `dt`, `dt/2` and `dt/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dts: [f64; 3],
    pub ells: [f64; 3],
    pub exits: [[f64; 2]; 3],
    /// |ℓ(dt) − ℓ(dt/2)| / |ℓ(dt/2) − ℓ(dt/4)|; about 16 for RK4.
    pub ratio: f64,
    /// Richardson estimate of the error left in the `dt/4` run.
    pub error_estimate: f64,
}

pub fn step_halving(
    speed: &SpeedField,
    domain: &Domain,
    entry: &BoundaryDirection<2>,
    cfg: &RayConfig,
) -> Result<ConvergenceReport> {
    let mut ells = [0.0; 3];
    let mut exits = [[0.0; 2]; 3];
    let mut dts = [0.0; 3];
    for k in 0..3 {
        let dt = cfg.dt / f64::from(1u32 << k);
        let rec = scattering_relation(speed, domain, entry, &RayConfig { dt, ..*cfg })?;
        match (rec.ell, rec.exit) {
            (Some(ell), Some(exit)) => {
                ells[k] = ell;
                exits[k] = exit.x;
            }
            _ => {
                return Err(Error::Precondition(format!(
                    "ray did not exit at dt = {dt} ({})",
                    rec.status.as_str()
                )))
            }
        }
        dts[k] = dt;
    }
    let d1 = (ells[0] - ells[1]).abs();
    let d2 = (ells[1] - ells[2]).abs();
    Ok(ConvergenceReport {
        dts,
        ells,
        exits,
        ratio: if d2 > 0.0 { d1 / d2 } else { f64::INFINITY },
        error_estimate: d2 / 15.0,
    })
}

/// Boundary points × fan of inward angles for a planar domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySampling {
    pub points: usize,
    pub angles: usize,
    /// Half-width of the angle fan, measured from the inward normal.
    pub fan_half_width_deg: f64,
    /// Arclength range `[start, end)` of the sampled boundary stretch; the
    /// whole boundary when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<[f64; 2]>,
}

impl BoundarySampling {
    pub fn new(points: usize, angles: usize) -> Self {
        Self { points, angles, fan_half_width_deg: 85.0, arc: None }
    }

    /// Angles from the inward normal, counter-clockwise positive (radians).
    pub fn fan(&self) -> Vec<f64> {
        let a = self.fan_half_width_deg.to_radians();
        if self.angles == 1 {
            return vec![0.0];
        }
        (0..self.angles)
            .map(|j| -a + 2.0 * a * j as f64 / (self.angles - 1) as f64)
            .collect()
    }

    /// Boundary arclength parameters of the sample points.
    pub fn params(&self, domain: &Domain) -> Result<Vec<f64>> {
        let per = domain.perimeter()?;
        let n = self.points as f64;
        Ok(match (self.arc, domain) {
            (Some([a, b]), _) => (0..self.points).map(|i| a + (b - a) * (i as f64 + 0.5) / n).collect(),
            // Disks start at angle 0; boxes at mid-cells to keep off the corners.
            (None, Domain::Disk { .. }) => (0..self.points).map(|i| per * i as f64 / n).collect(),
            (None, Domain::Box { .. }) => (0..self.points).map(|i| per * (i as f64 + 0.5) / n).collect(),
        })
    }
}

/// A lens table row with boundary coordinates: arclength and angle from the
/// normal (inward for the entry, outward for the exit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensEntry {
    pub entry_s: f64,
    pub entry_angle: f64,
    pub record: LensRecord<2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensTable {
    pub domain: Domain,
    pub sampling: BoundarySampling,
    pub config: RayConfig,
    pub rows: Vec<LensEntry>,
}

/// Inward direction at boundary parameter `s` rotated by `angle` from the
/// inward normal.
pub fn entry_direction(domain: &Domain, s: f64, angle: f64) -> Result<BoundaryDirection<2>> {
    let x = domain.boundary_point(s)?;
    let n = domain.boundary_normal(&x)?;
    Ok(BoundaryDirection { x, v: vecn::rotate2(&vecn::scale(&n, -1.0), angle) })
}

/// Evaluates the scattering relation on every (boundary point, angle) pair,
/// boundary parameter major and angle minor. Rays run in parallel; the row
/// order does not depend on scheduling.
pub fn lens_table(
    speed: &SpeedField,
    domain: &Domain,
    sampling: &BoundarySampling,
    cfg: &RayConfig,
) -> Result<LensTable> {
    if sampling.points == 0 || sampling.angles == 0 {
        return Err(Error::Config("lens table needs at least one point and one angle".into()));
    }
    let params = sampling.params(domain)?;
    let fan = sampling.fan();
    let jobs: Vec<(f64, f64)> = params
        .iter()
        .flat_map(|&s| fan.iter().map(move |&a| (s, a)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(s, angle)| {
            let entry = entry_direction(domain, s, angle)?;
            let record = scattering_relation(speed, domain, &entry, cfg)?;
            Ok(LensEntry { entry_s: s, entry_angle: angle, record })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LensTable {
        domain: domain.clone(),
        sampling: *sampling,
        config: *cfg,
        rows,
    })
}

impl LensTable {
    /// Exit arclength and exit angle (from the outward normal) of a row.
    pub fn exit_coords(&self, row: &LensEntry) -> Result<Option<(f64, f64)>> {
        match row.record.exit {
            None => Ok(None),
            Some(exit) => {
                let s = self.domain.boundary_param(&exit.x)?;
                let n = self.domain.normal_near(&exit.x);
                Ok(Some((s, vecn::signed_angle2(&n, &exit.v))))
            }
        }
    }

    pub fn max_ell(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.record.ell).reduce(f64::max)
    }

    pub fn count(&self, status: &str) -> usize {
        self.rows.iter().filter(|r| r.record.status.as_str() == status).count()
    }

    /// CSV with header `entry_s,entry_angle,exit_s,exit_angle,ell,status`;
    /// angles in radians, missing values left empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("entry_s,entry_angle,exit_s,exit_angle,ell,status\n");
        for row in &self.rows {
            let (es, ea) = match self.exit_coords(row)? {
                Some((s, a)) => (fmt(s), fmt(a)),
                None => (String::new(), String::new()),
            };
            let ell = row.record.ell.map(fmt).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt(row.entry_s),
                fmt(row.entry_angle),
                es,
                ea,
                ell,
                row.record.status.as_str()
            )
            .expect("writing to a String cannot fail");
        }
        Ok(out)
    }

    /// Parses a table written by [`LensTable::to_csv`] back into
    /// (entry_s, entry_angle, exit_s, exit_angle, ell, status) tuples.
    pub fn parse_csv(text: &str) -> Result<Vec<LensCsvRow>> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "entry_s,entry_angle,exit_s,exit_angle,ell,status" {
            return Err(Error::Config(format!("unexpected lens table header '{header}'")));
        }
        let num = |s: &str, line: usize| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Config(format!("line {line}: bad number '{s}'")))
            }
        };
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| {
                let line = k + 2;
                let f: Vec<&str> = l.split(',').map(str::trim).collect();
                if f.len() != 6 {
                    return Err(Error::Config(format!("line {line}: expected 6 fields")));
                }
                Ok(LensCsvRow {
                    entry_s: num(f[0], line)?.unwrap_or(f64::NAN),
                    entry_angle: num(f[1], line)?.unwrap_or(f64::NAN),
                    exit_s: num(f[2], line)?,
                    exit_angle: num(f[3], line)?,
                    ell: num(f[4], line)?,
                    status: f[5].to_string(),
                })
            })
            .collect()
    }
}

impl LensTable {
    /// Rebuilds a table on `domain` from its CSV form. Rows sharing an entry
    /// parameter must be consecutive; the fan size is read from the first
    /// group and the fan half-width from the largest entry angle.
    pub fn from_csv(text: &str, domain: &Domain, config: RayConfig) -> Result<Self> {
        let parsed = Self::parse_csv(text)?;
        let Some(first) = parsed.first() else {
            return Err(Error::Config("lens table has no rows".into()));
        };
        let angles = parsed.iter().take_while(|r| r.entry_s == first.entry_s).count();
        if parsed.len() % angles != 0 {
            return Err(Error::Shape(format!(
                "{} rows do not split into groups of {angles} angles",
                parsed.len()
            )));
        }
        let half = parsed.iter().map(|r| r.entry_angle.abs()).fold(0.0, f64::max);
        let rows = parsed
            .iter()
            .map(|r| {
                let entry = entry_direction(domain, r.entry_s, r.entry_angle)?;
                let exit = match (r.exit_s, r.exit_angle) {
                    (Some(s), Some(a)) => {
                        let x = domain.boundary_point(s)?;
                        Some(BoundaryDirection { x, v: vecn::rotate2(&domain.normal_near(&x), a) })
                    }
                    _ => None,
                };
                let status = match r.status.as_str() {
                    "exited" => LensStatus::Exited,
                    "trapped" => LensStatus::Trapped { t_max: config.t_max },
                    "tangent_entry" => LensStatus::TangentEntry,
                    other => return Err(Error::Config(format!("unknown lens status '{other}'"))),
                };
                Ok(LensEntry {
                    entry_s: r.entry_s,
                    entry_angle: r.entry_angle,
                    record: LensRecord { entry, exit, ell: r.ell, status, max_h_drift: 0.0 },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain: domain.clone(),
            sampling: BoundarySampling {
                points: rows.len() / angles,
                angles,
                fan_half_width_deg: half.to_degrees(),
                arc: None,
            },
            config,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensCsvRow {
    pub entry_s: f64,
    pub entry_angle: f64,
    pub exit_s: Option<f64>,
    pub exit_angle: Option<f64>,
    pub ell: Option<f64>,
    pub status: String,
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}
