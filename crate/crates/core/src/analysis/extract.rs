use serde::{Deserialize, Serialize};

use crate::analysis::picking::{detect_events, reference_pick, PickConfig};
use crate::error::{Error, Result};
use crate::model::Domain;
use crate::ray::LensTable;
use crate::sim::{BoundarySource, TractionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub pick: PickConfig,
    /// Lens-table entries count as source points where the source profile
    /// is at least this large.
    pub support_level: f64,
    /// Predictions closer than this many periods are flagged ambiguous.
    pub ambiguity_periods: f64,
    /// Picks closer than this many periods are flagged.
    pub separation_periods: f64,
}

impl ExtractConfig {
    pub fn new(f0: f64, eta: f64) -> Self {
        Self { pick: PickConfig::new(f0, eta), support_level: 0.5, ambiguity_periods: 3.0, separation_periods: 2.0 }
    }
}

/// Arrival times recovered at one receiver, next to the ray-theoretic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedLens {
    pub source: [f64; 2],
    pub receiver: [f64; 2],
    /// Edge coordinate of the receiver.
    pub receiver_s: f64,
    pub t_p: Option<f64>,
    pub t_s: Option<f64>,
    pub ell_p: Option<f64>,
    pub ell_s: Option<f64>,
    pub rel_err_p: Option<f64>,
    pub rel_err_s: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub records: Vec<ExtractedLens>,
    /// Receivers without any pick.
    pub no_pick: usize,
    pub max_rel_err_p: Option<f64>,
    pub max_rel_err_s: Option<f64>,
    /// Pick time of the reference wavelet subtracted from every pick.
    pub reference_pick: f64,
}

impl ExtractionSummary {
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut out = String::from("receiver_s,t_p,t_s,ell_p,ell_s,rel_err_p,rel_err_s,flags\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.12e},{},{},{},{},{},{},{}\n",
                r.receiver_s,
                f(r.t_p),
                f(r.t_s),
                f(r.ell_p),
                f(r.ell_s),
                f(r.rel_err_p),
                f(r.rel_err_s),
                r.flags.join(";")
            ));
        }
        out
    }
}

/// Shortest travel time in `table` from a source-supported entry to the
/// boundary point `receiver`, interpolating linearly in the exit parameter
/// between neighbouring angles of the fan.
pub fn exit_ell(
    table: &LensTable,
    source: &BoundarySource,
    support_level: f64,
    receiver: &[f64; 2],
) -> Result<Option<f64>> {
    let domain = &table.domain;
    let target = domain.boundary_param(receiver)?;
    let per = domain.perimeter()?;
    let angles = table.sampling.angles;
    let a = source.edge.tangent_axis();
    let mut best: Option<f64> = None;
    for group in table.rows.chunks(angles) {
        let entry = group[0].record.entry.x;
        if domain.normal_near(&entry) != source.edge.outward_normal() || source.profile(entry[a]) < support_level {
            continue;
        }
        let mut prev: Option<(f64, f64)> = None;
        for row in group {
            let cur = match (table.exit_coords(row)?, row.record.ell) {
                (Some((s, _)), Some(ell)) => Some((s, ell)),
                _ => None,
            };
            if let (Some((s0, l0)), Some((s1, l1))) = (prev, cur) {
                let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
                // neighbouring exits straddling the parameter origin are skipped
                if hi - lo < 0.5 * per && (lo..=hi).contains(&target) {
                    let w = if hi > lo { (target - s0) / (s1 - s0) } else { 0.0 };
                    let ell = l0 + w * (l1 - l0);
                    best = Some(best.map_or(ell, |b: f64| b.min(ell)));
                }
            }
            prev = cur;
        }
    }
    Ok(best)
}

/// Picks p and s arrivals at every receiver and compares them with the
/// ray-theoretic travel times from the lens tables.
///
/// Picks are calibrated by the reference wavelet pick, events are found by
/// [`detect_events`], and each mode takes the event nearest its predicted
/// time. Without tables the first two events are reported as p and s.
pub fn extract_lens(
    traces: &[TractionTrace],
    source: &BoundarySource,
    domain: &Domain,
    lens_p: Option<&LensTable>,
    lens_s: Option<&LensTable>,
    cfg: &ExtractConfig,
) -> Result<ExtractionSummary> {
    let Some(first) = traces.first() else {
        return Err(Error::Precondition("no traces to extract from".into()));
    };
    let dt = first.dt;
    let reference = reference_pick(&source.pulse, dt, &cfg.pick)?;
    let period = 1.0 / cfg.pick.f0;
    let src_point = source.center_point(domain)?;
    let mut records = Vec::with_capacity(traces.len());
    let mut no_pick = 0;
    for tr in traces {
        let ell_p = lens_p.map(|t| exit_ell(t, source, cfg.support_level, &tr.point)).transpose()?.flatten();
        let ell_s = lens_s.map(|t| exit_ell(t, source, cfg.support_level, &tr.point)).transpose()?.flatten();
        let events = detect_events(&[tr.component(0), tr.component(1)], tr.dt, &cfg.pick)?;
        let times: Vec<f64> = events.iter().map(|e| e.onset - reference).collect();
        let mut flags = Vec::new();
        if times.is_empty() {
            no_pick += 1;
            flags.push("no_pick".to_string());
        }
        let nearest = |target: f64| {
            times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .map(|(i, t)| (i, *t))
        };
        let (t_p, t_s) = match (ell_p, ell_s) {
            (Some(lp), Some(ls)) => {
                if (lp - ls).abs() < cfg.ambiguity_periods * period {
                    flags.push("ambiguous".into());
                }
                let p = nearest(lp);
                let s = nearest(ls);
                match (p, s) {
                    (Some(p), Some(s)) if p.0 == s.0 => {
                        flags.push("single_event".into());
                        if (p.1 - lp).abs() <= (s.1 - ls).abs() {
                            (Some(p.1), None)
                        } else {
                            (None, Some(s.1))
                        }
                    }
                    (p, s) => (p.map(|v| v.1), s.map(|v| v.1)),
                }
            }
            (Some(lp), None) => (nearest(lp).map(|v| v.1), None),
            (None, Some(ls)) => (None, nearest(ls).map(|v| v.1)),
            (None, None) => (times.first().copied(), times.get(1).copied()),
        };
        if let (Some(p), Some(s)) = (t_p, t_s) {
            if s - p < cfg.separation_periods * period {
                flags.push("close_picks".into());
            }
            if p >= s {
                flags.push("mode_order".into());
            }
        }
        let rel = |t: Option<f64>, l: Option<f64>| match (t, l) {
            (Some(t), Some(l)) if l > 0.0 => Some((t - l).abs() / l),
            _ => None,
        };
        records.push(ExtractedLens {
            source: src_point,
            receiver: tr.point,
            receiver_s: tr.receiver.s,
            t_p,
            t_s,
            ell_p,
            ell_s,
            rel_err_p: rel(t_p, ell_p),
            rel_err_s: rel(t_s, ell_s),
            flags,
        });
    }
    let max_of = |f: fn(&ExtractedLens) -> Option<f64>| records.iter().filter_map(f).reduce(f64::max);
    Ok(ExtractionSummary {
        max_rel_err_p: max_of(|r| r.rel_err_p),
        max_rel_err_s: max_of(|r| r.rel_err_s),
        records,
        no_pick,
        reference_pick: reference,
    })
}
