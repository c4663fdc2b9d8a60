use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Ricker, TractionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickMode {
    P,
    S,
    Unknown,
}

/// First-arrival pick on a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPick {
    pub time: f64,
    pub mode: PickMode,
    /// Envelope RMS over one period after the pick divided by the RMS over
    /// one period before it.
    pub quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickConfig {
    /// Centre frequency of the source wavelet.
    pub f0: f64,
    /// Threshold relative to the envelope maximum.
    pub eta: f64,
}

impl PickConfig {
    pub fn new(f0: f64, eta: f64) -> Self {
        Self { f0, eta }
    }

    fn check(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Precondition(format!("pick threshold must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.f0 > 0.0) {
            return Err(Error::Precondition(format!("f0 must be positive, got {}", self.f0)));
        }
        Ok(())
    }
}

fn moving_average_centered(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

fn moving_average_causal(x: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= width {
            acc -= x[i - width];
        }
        out.push(acc / width.min(i + 1) as f64);
    }
    out
}

/// Envelope of one or more components sampled every `dt`.
///
/// Each component is high-passed by removing a centred running mean one
/// period `1/f0` long; the quadrature partner is the derivative scaled by
/// `1/(2π f0)`; the root-sum-square is smoothed by a causal box of length
/// `1/(4 f0)`.
pub fn envelope(components: &[Vec<f64>], dt: f64, f0: f64) -> Vec<f64> {
    let n = components.first().map_or(0, Vec::len);
    let half = ((0.5 / (f0 * dt)).round() as usize).max(1);
    let mut sq = vec![0.0; n];
    for c in components {
        let mean = moving_average_centered(c, half);
        let s: Vec<f64> = c.iter().zip(&mean).map(|(a, b)| a - b).collect();
        for i in 0..n {
            let d = if n < 2 {
                0.0
            } else if i == 0 {
                (s[1] - s[0]) / dt
            } else if i == n - 1 {
                (s[n - 1] - s[n - 2]) / dt
            } else {
                (s[i + 1] - s[i - 1]) / (2.0 * dt)
            };
            let q = d / (2.0 * PI * f0);
            sq[i] += s[i] * s[i] + q * q;
        }
    }
    let env: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
    let width = ((0.25 / (f0 * dt)).round() as usize).max(1);
    moving_average_causal(&env, width)
}

/// Time at which `env` first reaches `level` at or after index `from`,
/// refined by a quadratic through the bracketing samples.
fn crossing(env: &[f64], level: f64, from: usize, dt: f64) -> Option<f64> {
    let n = (from..env.len()).find(|&i| env[i] >= level)?;
    if n == 0 {
        return Some(0.0);
    }
    let (y1, y2) = (env[n - 1], env[n]);
    let linear = (n - 1) as f64 + (level - y1) / (y2 - y1);
    if n + 1 >= env.len() || n < 2 {
        return Some(linear * dt);
    }
    // quadratic through n-1, n, n+1 in local coordinate τ = i - n
    let (a0, b0, c0) = (env[n - 1], env[n], env[n + 1]);
    let a = 0.5 * (a0 + c0) - b0;
    let b = 0.5 * (c0 - a0);
    let c = b0 - level;
    let tau = if a.abs() < 1e-14 * (b.abs() + c.abs()) {
        -c / b
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Some(linear * dt);
        }
        let r1 = (-b + disc.sqrt()) / (2.0 * a);
        let r2 = (-b - disc.sqrt()) / (2.0 * a);
        let inside = |r: f64| (-1.0..=0.0).contains(&r);
        match (inside(r1), inside(r2)) {
            (true, false) => r1,
            (false, true) => r2,
            (true, true) => r1.max(r2),
            _ => return Some(linear * dt),
        }
    };
    Some((n as f64 + tau) * dt)
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn quality(env: &[f64], t: f64, dt: f64, f0: f64) -> f64 {
    let k = (t / dt).round() as usize;
    let w = ((1.0 / (f0 * dt)).round() as usize).max(1);
    let pre = rms(&env[k.saturating_sub(w)..k.min(env.len())]);
    let post = rms(&env[k.min(env.len())..(k + w).min(env.len())]);
    let peak = env.iter().cloned().fold(0.0, f64::max);
    post / pre.max(1e-12 * peak)
}

/// First time the envelope reaches `eta` of its maximum; `None` for an
/// all-zero series.
pub fn pick_series(components: &[Vec<f64>], dt: f64, cfg: &PickConfig) -> Result<Option<ArrivalPick>> {
    cfg.check()?;
    if components.is_empty() || components[0].is_empty() {
        return Err(Error::Precondition("empty trace".into()));
    }
    let env = envelope(components, dt, cfg.f0);
    let peak = env.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Ok(None);
    }
    let Some(time) = crossing(&env, cfg.eta * peak, 0, dt) else {
        return Ok(None);
    };
    Ok(Some(ArrivalPick { time, mode: PickMode::Unknown, quality: quality(&env, time, dt, cfg.f0) }))
}

pub fn pick_first_arrival(trace: &TractionTrace, cfg: &PickConfig) -> Result<Option<ArrivalPick>> {
    pick_series(&[trace.component(0), trace.component(1)], trace.dt, cfg)
}

/// Pick time of the wavelet derivative `f'`, which is the waveform of the
/// traction of a plane wave; subtracting it converts picks to travel times.
pub fn reference_pick(pulse: &Ricker, dt: f64, cfg: &PickConfig) -> Result<f64> {
    let lead = (4.0 / (pulse.f0 * dt)).ceil() as usize;
    let n = lead + ((pulse.duration() + 4.0 / pulse.f0) / dt).ceil() as usize + 1;
    let s: Vec<f64> = (0..n).map(|k| pulse.derivative((k as f64 - lead as f64) * dt)).collect();
    pick_series(&[s], dt, cfg)?
        .map(|p| p.time - lead as f64 * dt)
        .ok_or_else(|| Error::Numerical("reference wavelet produced no pick".into()))
}

/// Onset of an envelope excursion above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset: f64,
    pub peak: f64,
    pub peak_time: f64,
}

/// Successive events: an event is detected when the envelope reaches
/// `eta · max` and the next one only after it has fallen below
/// `eta/2 · max` again. Each onset is the last rise through `eta` times the
/// event's own peak.
pub fn detect_events(components: &[Vec<f64>], dt: f64, cfg: &PickConfig) -> Result<Vec<Event>> {
    cfg.check()?;
    let env = envelope(components, dt, cfg.f0);
    let max = env.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let (hi, lo) = (cfg.eta * max, 0.5 * cfg.eta * max);
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(onset) = crossing(&env, hi, i, dt) {
        let start = (onset / dt).floor() as usize;
        let mut end = start;
        let mut peak = (0.0f64, start);
        while end < env.len() && env[end] >= lo {
            if env[end] > peak.0 {
                peak = (env[end], end);
            }
            end += 1;
        }
        // onset relative to the event's own peak, as for the reference wavelet
        let own = cfg.eta * peak.0;
        let onset = (i..=peak.1)
            .rev()
            .find(|&k| env[k] < own)
            .and_then(|k| crossing(&env, own, k, dt))
            .unwrap_or(onset);
        out.push(Event { onset, peak: peak.0 / max, peak_time: peak.1 as f64 * dt });
        if end >= env.len() {
            break;
        }
        i = end;
    }
    Ok(out)
}
