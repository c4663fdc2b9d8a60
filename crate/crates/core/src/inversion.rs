//! Travel-time inversion for radial and depth-layered speed models.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexity::{check_hwz, Sampling};
use crate::error::{Error, Result};
use crate::model::interp::MonotoneCubic;
use crate::model::{Domain, SpeedField};
use crate::ray::{scattering_relation, BoundaryDirection, LensStatus, RayConfig};
use crate::vecn;

/// Largest entry angle (from the inward normal) of the default ray fan.
pub const MAX_FAN_ANGLE_DEG: f64 = 87.0;

/// Travel time against distance: angular distance for radial models,
/// surface offset for layered ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeCurve {
    /// `(distance, time)`, distance strictly increasing.
    pub samples: Vec<[f64; 2]>,
    /// Whether the secant slopes `dT/dΔ` strictly decrease.
    pub monotone_p: bool,
}

fn secants(samples: &[[f64; 2]]) -> Vec<f64> {
    let mut prev = [0.0, 0.0];
    samples
        .iter()
        .map(|s| {
            let v = (s[1] - prev[1]) / (s[0] - prev[0]);
            prev = *s;
            v
        })
        .collect()
}

impl TravelTimeCurve {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition("travel-time curve has no samples".into()));
        }
        let mut prev = [0.0, 0.0];
        for (k, s) in samples.iter().enumerate() {
            if !s[0].is_finite() || !s[1].is_finite() {
                return Err(Error::Precondition(format!("sample {k} is not finite: {s:?}")));
            }
            if s[0] <= prev[0] || s[1] <= prev[1] {
                return Err(Error::Precondition(format!(
                    "distance and time must increase strictly from 0, sample {k} is {s:?} after {prev:?}"
                )));
            }
            prev = *s;
        }
        let monotone_p = secants(&samples).windows(2).all(|w| w[1] < w[0]);
        Ok(Self { samples, monotone_p })
    }

    /// The same curve with every time multiplied by `k`.
    pub fn scaled_times(&self, k: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| [s[0], k * s[1]]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,time\n");
        for s in &self.samples {
            out.push_str(&format!("{:.12e},{:.12e}\n", s[0], s[1]));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(read_pairs(text, "distance,time")?)
    }
}

fn read_pairs(text: &str, header: &str) -> Result<Vec<[f64; 2]>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => {
            return Err(Error::Config(format!("expected CSV header `{header}`, found {other:?}")));
        }
    }
    lines
        .enumerate()
        .map(|(k, l)| {
            let cols: Vec<&str> = l.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!("line {}: expected 2 columns, got {}", k + 2, cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: bad number `{s}`: {e}", k + 2)))
            };
            Ok([num(cols[0])?, num(cols[1])?])
        })
        .collect()
}

fn write_pairs(header: &str, nodes: &[[f64; 2]]) -> String {
    let mut out = format!("{header}\n");
    for n in nodes {
        out.push_str(&format!("{:.12e},{:.12e}\n", n[0], n[1]));
    }
    out
}

/// Linear interpolation in sorted nodes; `None` outside their range.
fn interp_nodes(nodes: &[[f64; 2]], x: f64) -> Option<f64> {
    let first = nodes.first()?;
    let last = nodes.last()?;
    if x < first[0] || x > last[0] {
        return None;
    }
    let k = nodes.partition_point(|n| n[0] <= x).clamp(1, nodes.len()) - 1;
    if k + 1 == nodes.len() {
        return Some(nodes[k][1]);
    }
    let (a, b) = (nodes[k], nodes[k + 1]);
    Some(a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0]))
}

/// Speed against radius on the radii reached by turning rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radius: f64,
    /// `(r, c)` with `r` increasing, the last node at the surface.
    pub nodes: Vec<[f64; 2]>,
}

impl RadialProfile {
    /// Smallest and largest recovered radius.
    pub fn covered(&self) -> (f64, f64) {
        (self.nodes[0][0], self.nodes[self.nodes.len() - 1][0])
    }

    /// Linear interpolant; `None` (unknown) below the deepest turning radius.
    pub fn eval(&self, r: f64) -> Option<f64> {
        interp_nodes(&self.nodes, r)
    }

    pub fn to_csv(&self) -> String {
        write_pairs("r,c", &self.nodes)
    }
}

/// Speed against depth, piecewise linear between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    /// `(z, c)` with `z` increasing from the surface `z = 0`.
    pub nodes: Vec<[f64; 2]>,
}

impl DepthProfile {
    pub fn new(nodes: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.is_empty() || nodes[0][0] != 0.0 {
            return Err(Error::Precondition("depth profile must start at z = 0".into()));
        }
        if nodes.windows(2).any(|w| w[1][0] <= w[0][0]) || nodes.iter().any(|n| !(n[1] > 0.0)) {
            return Err(Error::Precondition("depth nodes must increase and speeds be positive".into()));
        }
        Ok(Self { nodes })
    }

    pub fn max_depth(&self) -> f64 {
        self.nodes[self.nodes.len() - 1][0]
    }

    /// `None` (unknown) below the deepest node.
    pub fn eval(&self, z: f64) -> Option<f64> {
        interp_nodes(&self.nodes, z)
    }

    pub fn to_csv(&self) -> String {
        write_pairs("z,c", &self.nodes)
    }
}

/// A recovered profile of either geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Radial(RadialProfile),
    Depth(DepthProfile),
}

impl Profile {
    pub fn nodes(&self) -> &[[f64; 2]] {
        match self {
            Profile::Radial(p) => &p.nodes,
            Profile::Depth(p) => &p.nodes,
        }
    }

    pub fn eval(&self, s: f64) -> Option<f64> {
        match self {
            Profile::Radial(p) => p.eval(s),
            Profile::Depth(p) => p.eval(s),
        }
    }

    /// Model point at profile coordinate `s`: `(s, 0)` or `(0, s)`.
    pub fn point(&self, s: f64) -> [f64; 2] {
        match self {
            Profile::Radial(_) => [s, 0.0],
            Profile::Depth(_) => [0.0, s],
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Profile::Radial(p) => p.to_csv(),
            Profile::Depth(p) => p.to_csv(),
        }
    }

    /// Reads `r,c` (radial, outer radius taken from the last node) or `z,c`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let header = text.lines().next().unwrap_or("").trim();
        match header {
            "r,c" => {
                let nodes = read_pairs(text, "r,c")?;
                let radius = nodes
                    .last()
                    .map(|n| n[0])
                    .ok_or_else(|| Error::Config("empty profile".into()))?;
                Ok(Profile::Radial(RadialProfile { radius, nodes }))
            }
            "z,c" => Ok(Profile::Depth(DepthProfile::new(read_pairs(text, "z,c")?)?)),
            other => Err(Error::Config(format!("unknown profile header `{other}`, expected `r,c` or `z,c`"))),
        }
    }
}

/// Ray parameters `p = R sin α / c(R)` for `count` entry angles `α` evenly
/// spaced in `(0, 87°]`.
pub fn ray_parameter_fan(speed: &SpeedField, radius: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Config("ray fan needs at least one ray".into()));
    }
    let p_max = radius / speed.eval(&[radius, 0.0])?;
    let a = MAX_FAN_ANGLE_DEG.to_radians();
    Ok((1..=count).map(|i| p_max * (a * i as f64 / count as f64).sin()).collect())
}

/// Radius where `r / c(r) = p`, by bisection on `(0, R]`.
fn turning_radius(speed: &SpeedField, radius: f64, p: f64) -> Result<f64> {
    let g = |r: f64| -> Result<f64> { Ok(r / speed.eval(&[r, 0.0])? - p) };
    let (mut lo, mut hi) = (1e-9 * radius, radius);
    if g(hi)? <= 0.0 {
        return Ok(radius);
    }
    if g(lo)? >= 0.0 {
        return Ok(lo);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Traces one ray per parameter from `(R, 0)` into the disk and records
/// the angular distance to the exit point and the travel time.
///
/// The profile must pass the Herglotz check on the radii the rays reach;
/// otherwise the report is returned in [`Error::NotConvex`].
pub fn forward_travel_times(
    speed: &SpeedField,
    radius: f64,
    params: &[f64],
    cfg: &RayConfig,
) -> Result<TravelTimeCurve> {
    if !speed.is_radial() {
        return Err(Error::Unsupported("radial travel times need a radial speed".into()));
    }
    if params.is_empty() {
        return Err(Error::Config("no ray parameters".into()));
    }
    let c_r = speed.eval(&[radius, 0.0])?;
    let p_max = radius / c_r;
    if let Some(p) = params.iter().find(|p| !(**p > 0.0 && **p < p_max)) {
        return Err(Error::Config(format!("ray parameter {p} outside (0, {p_max})")));
    }
    let p_min = params.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_lo = 0.9 * turning_radius(speed, radius, p_min)?;
    let report = check_hwz::<2>(speed, r_lo.max(1e-6 * radius), radius, &Sampling::default())?;
    if !report.is_strictly_convex() {
        return Err(Error::NotConvex(Box::new(report)));
    }
    let domain = Domain::disk(radius);
    let mut samples = params
        .par_iter()
        .map(|&p| {
            let alpha = (p * c_r / radius).asin();
            let entry = BoundaryDirection::new([radius, 0.0], vecn::rotate2(&[-1.0, 0.0], alpha));
            let rec = scattering_relation(speed, &domain, &entry, cfg)?;
            match (rec.status, rec.exit, rec.ell) {
                (LensStatus::Exited, Some(exit), Some(ell)) => {
                    let delta = (-exit.x[1].atan2(exit.x[0])).rem_euclid(2.0 * PI);
                    Ok([delta, ell])
                }
                (status, ..) => Err(Error::Numerical(format!(
                    "ray with parameter {p} did not exit ({})",
                    status.as_str()
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a[0].total_cmp(&b[0]));
    TravelTimeCurve::new(samples)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Quadrature points per ray in the Herglotz integral.
pub const HERGLOTZ_POINTS: usize = 32;

/// Fit of `T(Δ)` through the origin; returns distances and node slopes.
fn slowness_nodes(curve: &TravelTimeCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    let sec = secants(&curve.samples);
    if let Some(k) = sec.windows(2).position(|w| w[1] >= w[0]) {
        let at = |i: usize| if i == 0 { 0.0 } else { curve.samples[i - 1][0] };
        return Err(Error::IllPosed(format!(
            "slope dT/dΔ does not decrease: {:.6e} on [{:.6e}, {:.6e}] then {:.6e} on [{:.6e}, {:.6e}]",
            sec[k],
            at(k),
            curve.samples[k][0],
            sec[k + 1],
            curve.samples[k][0],
            curve.samples[k + 1][0]
        )));
    }
    let xs: Vec<f64> = std::iter::once(0.0).chain(curve.samples.iter().map(|s| s[0])).collect();
    let ys: Vec<f64> = std::iter::once(0.0).chain(curve.samples.iter().map(|s| s[1])).collect();
    let fit = MonotoneCubic::new(xs.clone(), ys)?;
    let p = fit.slopes().to_vec();
    if let Some(k) = p.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(Error::IllPosed(format!(
            "fitted slope does not decrease between Δ = {:.6e} (p = {:.6e}) and Δ = {:.6e} (p = {:.6e})",
            xs[k],
            p[k],
            xs[k + 1],
            p[k + 1]
        )));
    }
    if p.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::IllPosed("fitted ray parameter is not positive".into()));
    }
    Ok((xs, p))
}

/// Herglotz–Wiechert inversion of a radial travel-time curve.
///
/// `p(Δ) = dT/dΔ` is taken from a monotone cubic fit through the origin
/// and interpolated linearly between samples. The turning radius of the
/// ray with parameter `p_j` follows from
/// `ln(R/r_j) = (1/π) ∫₀^{Δ_j} arccosh(p(Δ′)/p_j) dΔ′`, evaluated with the
/// substitution `Δ′ = Δ_j − q²` and a 32-point Gauss–Legendre rule, and
/// `c(r_j) = r_j / p_j`. Radii below the deepest turning point are left out.
pub fn herglotz_invert(curve: &TravelTimeCurve, radius: f64) -> Result<RadialProfile> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let (xs, p) = slowness_nodes(curve)?;
    let (gx, gw) = gauss_legendre(HERGLOTZ_POINTS);
    let p_at = |d: f64| -> f64 {
        let k = xs.partition_point(|x| *x <= d).clamp(1, xs.len() - 1) - 1;
        let t = (d - xs[k]) / (xs[k + 1] - xs[k]);
        p[k] + t * (p[k + 1] - p[k])
    };
    let mut nodes = vec![[radius, radius / p[0]]];
    for j in 1..xs.len() {
        let (dj, pj) = (xs[j], p[j]);
        let qmax = dj.sqrt();
        let integral: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| {
                let q = 0.5 * qmax * (x + 1.0);
                let ratio = (p_at(dj - q * q) / pj).max(1.0);
                0.5 * qmax * w * ratio.acosh() * 2.0 * q
            })
            .sum();
        let r = radius * (-integral / PI).exp();
        nodes.push([r, r / pj]);
    }
    nodes.reverse();
    if let Some(w) = nodes.windows(2).find(|w| !(w[1][0] > w[0][0])) {
        return Err(Error::Numerical(format!("turning radii are not monotone near r = {:.6e}", w[0][0])));
    }
    Ok(RadialProfile { radius, nodes })
}

/// Half-offset and half-time of a ray with parameter `p` crossing a layer
/// where `c` runs linearly from `ca` to `cb` over thickness `h`.
fn layer_leg(p: f64, ca: f64, cb: f64, h: f64) -> (f64, f64) {
    let eta = |c: f64| (1.0 - p * p * c * c).max(0.0).sqrt();
    let (ea, eb) = (eta(ca), eta(cb));
    let g = (cb - ca) / h;
    if (cb - ca).abs() <= 1e-12 * ca {
        let c = 0.5 * (ca + cb);
        let e = eta(c);
        return (h * p * c / e, h / (c * e));
    }
    ((ea - eb) / (p * g), ((cb * (1.0 + ea)) / (ca * (1.0 + eb))).ln() / g)
}

/// Offset and time of the turning ray with parameter `p` in a layered
/// profile; `None` when it does not turn above the deepest node.
fn layered_ray(nodes: &[[f64; 2]], p: f64) -> Option<(f64, f64)> {
    let turn = 1.0 / p;
    if nodes[0][1] >= turn {
        return None;
    }
    let (mut x, mut t) = (0.0, 0.0);
    for w in nodes.windows(2) {
        let ([za, ca], [zb, cb]) = (w[0], w[1]);
        if cb < turn {
            let (dx, dt) = layer_leg(p, ca, cb, zb - za);
            x += 2.0 * dx;
            t += 2.0 * dt;
        } else {
            let zt = za + (zb - za) * (turn - ca) / (cb - ca);
            let (dx, dt) = layer_leg(p, ca, turn, zt - za);
            return Some((x + 2.0 * dx, t + 2.0 * dt));
        }
    }
    None
}

/// Surface offset and travel time of rays in a layered half-space, in
/// order of increasing penetration depth. Offsets need not increase
/// (triplications are kept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetCurve {
    pub samples: Vec<[f64; 2]>,
}

impl OffsetCurve {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Precondition("layer stripping needs at least two samples".into()));
        }
        if let Some((k, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(s[0] > 0.0 && s[1] > 0.0 && s[0].is_finite() && s[1].is_finite()))
        {
            return Err(Error::Precondition(format!("sample {k} needs positive offset and time, got {s:?}")));
        }
        Ok(Self { samples })
    }

    pub fn to_csv(&self) -> String {
        write_pairs("distance,time", &self.samples)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(read_pairs(text, "distance,time")?)
    }
}

impl From<&TravelTimeCurve> for OffsetCurve {
    fn from(c: &TravelTimeCurve) -> Self {
        Self { samples: c.samples.clone() }
    }
}

/// Offsets and times of the turning rays with the given parameters, in
/// the order of `params`. Every ray must turn above the deepest node.
pub fn layered_travel_times(profile: &DepthProfile, params: &[f64]) -> Result<OffsetCurve> {
    let samples = params
        .par_iter()
        .map(|&p| {
            layered_ray(&profile.nodes, p).map(|(x, t)| [x, t]).ok_or_else(|| {
                Error::Precondition(format!(
                    "ray with parameter {p} does not turn above z = {}",
                    profile.max_depth()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OffsetCurve::new(samples)
}

/// Result of layer stripping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStripping {
    pub profile: DepthProfile,
    /// Largest relative travel-time misfit of the stripped model.
    pub max_time_misfit: f64,
    /// Samples explained by the stack above without a new layer.
    pub explained: usize,
}

/// Relative travel-time misfit tolerated by [`layer_strip_invert`].
pub const STRIP_TOLERANCE: f64 = 0.01;

/// Speed at zero offset from the parabola `T = aX + bX²` through the two
/// shortest offsets.
fn top_speed_estimate(samples: &[[f64; 2]]) -> Result<f64> {
    let mut s: Vec<[f64; 2]> = samples.to_vec();
    s.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let ([x1, t1], [x2, t2]) = (s[0], s[1]);
    if x2 <= x1 {
        return Err(Error::IllPosed("two samples share the shortest offset".into()));
    }
    let a = (t1 * x2 * x2 - t2 * x1 * x1) / (x1 * x2 * (x2 - x1));
    if !(a > 0.0) {
        return Err(Error::IllPosed("travel times give no top speed".into()));
    }
    Ok(1.0 / a)
}

/// Travel time of the ray landing at offset `x` after turning at the
/// bottom of a new linear layer below the stack with bottom speed `c`;
/// `None` when the stack alone already carries that ray beyond `x`.
fn new_layer_time(nodes: &[[f64; 2]], c: f64, x: f64) -> Option<(f64, f64)> {
    let [_, ck] = nodes[nodes.len() - 1];
    let p = 1.0 / c;
    let (xs, ts) = stack_legs(nodes, p);
    if x <= xs {
        return None;
    }
    let eta = (1.0 - p * p * ck * ck).max(0.0).sqrt();
    let dc = c - ck;
    // both legs are proportional to the layer thickness h
    let per_h_x = 2.0 * eta / (p * dc);
    let per_h_t = 2.0 * ((1.0 + eta) / (p * ck)).ln() / dc;
    let h = (x - xs) / per_h_x;
    Some((ts + h * per_h_t, h))
}

/// Bottom speeds of new layers below the stack that reproduce `(x, t)`
/// exactly, scanned upward from the stack's bottom speed to `c_cap`, with
/// their thickness and relative time misfit.
fn layer_roots(nodes: &[[f64; 2]], x: f64, t: f64, c_cap: f64) -> Vec<(f64, f64, f64)> {
    let ck = nodes[nodes.len() - 1][1];
    let f = |c: f64| new_layer_time(nodes, c, x).map(|(tm, _)| tm - t);
    let mut roots = Vec::new();
    let mut lo = ck * (1.0 + 1e-9);
    let mut f_lo = f(lo);
    while lo < c_cap {
        let c = lo * 1.001;
        let f_c = f(c);
        if let (Some(a), Some(b)) = (f_lo, f_c) {
            if (a > 0.0) != (b > 0.0) {
                let (mut l, mut h) = (lo, c);
                for _ in 0..200 {
                    let mid = 0.5 * (l + h);
                    match f(mid) {
                        Some(v) if (v > 0.0) == (a > 0.0) => l = mid,
                        Some(_) => h = mid,
                        None => break,
                    }
                }
                let c_root = 0.5 * (l + h);
                if let Some((tm, h)) = new_layer_time(nodes, c_root, x) {
                    roots.push((c_root, h, (tm - t).abs() / t));
                }
            }
        }
        lo = c;
        f_lo = f_c;
    }
    roots
}

/// Best inexact fit of `(x, t)` by a new layer, accepted within
/// [`STRIP_TOLERANCE`].
fn closest_layer(nodes: &[[f64; 2]], x: f64, t: f64, c_cap: f64) -> Option<(f64, f64, f64)> {
    let ck = nodes[nodes.len() - 1][1];
    let score = |c: f64| new_layer_time(nodes, c, x).map_or(f64::INFINITY, |(tm, _)| (tm - t).abs());
    let mut best = (f64::INFINITY, ck);
    let mut c = ck * (1.0 + 1e-9);
    while c < c_cap {
        let v = score(c);
        if v < best.0 {
            best = (v, c);
        }
        c *= 1.001;
    }
    if !best.0.is_finite() {
        return None;
    }
    // golden-section refinement around the best scanned speed
    let (mut a, mut b) = (best.1 / 1.001, best.1 * 1.001);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (m1, m2) = (b - g * (b - a), a + g * (b - a));
        if score(m1) < score(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let c = 0.5 * (a + b);
    new_layer_time(nodes, c, x)
        .map(|(tm, h)| (c, h, (tm - t).abs() / t))
        .filter(|r| r.2 <= STRIP_TOLERANCE)
}

/// New layer turning the ray with parameter `p`, its thickness the least
/// squares fit of the relative offset and time residuals.
fn slope_layer(nodes: &[[f64; 2]], x: f64, t: f64, p: f64) -> Option<(f64, f64, f64)> {
    let [_, ck] = nodes[nodes.len() - 1];
    let c = 1.0 / p;
    if c <= ck {
        return None;
    }
    let (xs, ts) = stack_legs(nodes, p);
    let eta = (1.0 - p * p * ck * ck).max(0.0).sqrt();
    let dc = c - ck;
    let per_h_x = 2.0 * eta / (p * dc);
    let per_h_t = 2.0 * ((1.0 + eta) / (p * ck)).ln() / dc;
    let h = (per_h_x * (x - xs) / (x * x) + per_h_t * (t - ts) / (t * t))
        / (per_h_x * per_h_x / (x * x) + per_h_t * per_h_t / (t * t));
    let r = ((xs + h * per_h_x - x) / x).abs().max(((ts + h * per_h_t - t) / t).abs());
    (h > 0.0 && r <= STRIP_TOLERANCE).then_some((c, h, r))
}

/// Ray parameters `dT/dX` along the curve from centred differences in the
/// sample index, one-sided at the ends.
fn curve_slowness(samples: &[[f64; 2]]) -> Vec<Option<f64>> {
    let n = samples.len();
    (0..n)
        .map(|j| {
            if n < 3 {
                return None;
            }
            let d = |k: usize| -> [f64; 2] {
                let s = |i: usize| samples[i];
                match k {
                    0 => std::array::from_fn(|a| -1.5 * s(0)[a] + 2.0 * s(1)[a] - 0.5 * s(2)[a]),
                    k if k == n - 1 => std::array::from_fn(|a| 1.5 * s(k)[a] - 2.0 * s(k - 1)[a] + 0.5 * s(k - 2)[a]),
                    k => std::array::from_fn(|a| 0.5 * (s(k + 1)[a] - s(k - 1)[a])),
                }
            };
            let [dx, dt] = d(j);
            let p = dt / dx;
            (p.is_finite() && p > 0.0).then_some(p)
        })
        .collect()
}

/// Relative distance within which an exact layer must match the speed
/// implied by the local slope of the curve.
const SLOPE_MATCH: f64 = 0.02;

/// Layer stripping of surface travel times for a speed increasing with
/// depth.
///
/// Samples are taken in the given order (increasing penetration). Each
/// one that the known stack does not already explain adds a linear layer
/// whose bottom speed and thickness reproduce its offset and time, the
/// ray turning at the bottom of the layer. Where several layers fit, the
/// one whose bottom speed matches the local slope `dT/dX` of the curve is
/// kept; on triplicated branches with no exact fit the layer is built from
/// that slope directly. `top_speed` defaults to the zero-offset slope of
/// the two shortest offsets.
pub fn layer_strip_invert(curve: &OffsetCurve, top_speed: Option<f64>) -> Result<LayerStripping> {
    let c0 = match top_speed {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(Error::Config(format!("top speed must be positive, got {c}"))),
        None => top_speed_estimate(&curve.samples)?,
    };
    let mut nodes = vec![[0.0, c0]];
    let mut misfit = 0.0f64;
    let mut explained = 0;
    let slowness = curve_slowness(&curve.samples);
    for (j, &[x, t]) in curve.samples.iter().enumerate() {
        let [zk, ck] = nodes[nodes.len() - 1];
        // grazing ray along the bottom of the stack
        let q = 1.0 / ck;
        let (hx, ht) = stack_legs(&nodes, q);
        let head = (x >= hx).then_some(ht + q * (x - hx));
        let head_misfit = head.map(|th| (t - th) / t);
        if head_misfit.is_some_and(|m| m.abs() <= 1e-9) {
            explained += 1;
            continue;
        }
        let target = slowness[j].map(|p| 1.0 / p).filter(|&c| c > ck);
        let cap = target.map_or(50.0 * ck, |c| c * (1.0 + 2.0 * SLOPE_MATCH));
        let roots = layer_roots(&nodes, x, t, cap);
        let layer = match target {
            Some(c) => roots
                .into_iter()
                .filter(|r| (r.0 / c - 1.0).abs() <= SLOPE_MATCH)
                .min_by(|a, b| (a.0 - c).abs().total_cmp(&(b.0 - c).abs())),
            None => roots.into_iter().next(),
        };
        if layer.is_none() {
            if let Some(m) = head_misfit.filter(|m| (0.0..=STRIP_TOLERANCE).contains(m)) {
                explained += 1;
                misfit = misfit.max(m);
                continue;
            }
        }
        let layer = layer
            .or_else(|| target.and_then(|c| slope_layer(&nodes, x, t, 1.0 / c)))
            .or_else(|| closest_layer(&nodes, x, t, cap));
        match layer {
            Some((c_new, h, r)) if h > 0.0 => {
                misfit = misfit.max(r);
                nodes.push([zk + h, c_new]);
            }
            _ => {
                let bottom = curve.samples[j + 1..].iter().find_map(|s| {
                    layer_roots(&nodes, s[0], s[1], 50.0 * ck).first().map(|&(_, h, _)| zk + h)
                });
                let detail = match head {
                    Some(th) => format!(
                        "time {t:.6e} at offset {x:.6e} is {:.2}% later than the grazing ray along z = {zk:.4e}",
                        100.0 * (t - th) / th
                    ),
                    None => format!("no speed above {ck:.6e} fits time {t:.6e} at offset {x:.6e}"),
                };
                return Err(Error::LowVelocityZone { top: zk, bottom, detail });
            }
        }
    }
    if misfit > STRIP_TOLERANCE {
        return Err(Error::Numerical(format!(
            "stripped model misses the travel times by {:.2}% (tolerance {:.0}%)",
            100.0 * misfit,
            100.0 * STRIP_TOLERANCE
        )));
    }
    Ok(LayerStripping { profile: DepthProfile::new(nodes)?, max_time_misfit: misfit, explained })
}

/// Offset and time accumulated through every layer of the stack by a ray
/// that does not turn inside it.
fn stack_legs(nodes: &[[f64; 2]], p: f64) -> (f64, f64) {
    nodes.windows(2).fold((0.0, 0.0), |(x, t), w| {
        let (dx, dt) = layer_leg(p, w[0][1], w[1][1], w[1][0] - w[0][0]);
        (x + 2.0 * dx, t + 2.0 * dt)
    })
}

/// Geometry of the travel-time data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InversionGeometry {
    Radial { radius: f64 },
    Layered,
}

/// Inverts `(distance, time)` samples in the given geometry: sorted by
/// distance for radial data, in penetration order for layered data.
pub fn invert_curve(samples: &[[f64; 2]], geometry: InversionGeometry) -> Result<Profile> {
    Ok(match geometry {
        InversionGeometry::Radial { radius } => {
            Profile::Radial(herglotz_invert(&TravelTimeCurve::new(samples.to_vec())?, radius)?)
        }
        InversionGeometry::Layered => {
            Profile::Depth(layer_strip_invert(&OffsetCurve::new(samples.to_vec())?, None)?.profile)
        }
    })
}

/// Inverts p and s travel times separately and checks `c_p > c_s` at every
/// node of either profile inside their common support.
pub fn invert_both_speeds(
    samples_p: &[[f64; 2]],
    samples_s: &[[f64; 2]],
    geometry: InversionGeometry,
) -> Result<(Profile, Profile)> {
    let prof_p = invert_curve(samples_p, geometry)?;
    let prof_s = invert_curve(samples_s, geometry)?;
    let mut common = 0;
    for s in prof_p.nodes().iter().chain(prof_s.nodes()).map(|n| n[0]) {
        if let (Some(cp), Some(cs)) = (prof_p.eval(s), prof_s.eval(s)) {
            common += 1;
            if cp <= cs {
                return Err(Error::Inconsistent(format!(
                    "recovered c_p = {cp:.6e} <= c_s = {cs:.6e} at {s:.6e}; p and s times may be swapped"
                )));
            }
        }
    }
    if common == 0 {
        return Err(Error::Precondition("p and s profiles do not overlap".into()));
    }
    Ok((prof_p, prof_s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparePoint {
    pub coordinate: f64,
    pub recovered: f64,
    pub truth: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub points: Vec<ComparePoint>,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
}

/// Pointwise relative errors of a recovered profile at its nodes.
pub fn compare(profile: &Profile, truth: &SpeedField) -> Result<CompareReport> {
    let points = profile
        .nodes()
        .iter()
        .map(|n| {
            let t = truth.eval(&profile.point(n[0]))?;
            Ok(ComparePoint { coordinate: n[0], recovered: n[1], truth: t, rel_err: (n[1] - t).abs() / t })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_err = points.iter().map(|p| p.rel_err).fold(0.0, f64::max);
    let mean_rel_err = points.iter().map(|p| p.rel_err).sum::<f64>() / points.len().max(1) as f64;
    Ok(CompareReport { points, max_rel_err, mean_rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScalarField;

    fn chords(c: f64, n: usize) -> TravelTimeCurve {
        let samples = (1..=n)
            .map(|i| {
                let d = PI * i as f64 / (n + 1) as f64;
                [d, 2.0 * (0.5 * d).sin() / c]
            })
            .collect();
        TravelTimeCurve::new(samples).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((i - 2.0 / 63.0).abs() < 1e-13);
        let (x3, w3) = gauss_legendre(3);
        assert!((x3[2] - 0.6f64.sqrt()).abs() < 1e-15 && (w3[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn constant_speed_chords() {
        let cfg = RayConfig::new(1e-3, 4.0);
        for c in [1.0, 2.0] {
            let speed = ScalarField::constant(c);
            let params = ray_parameter_fan(&speed, 1.0, 16).unwrap();
            let curve = forward_travel_times(&speed, 1.0, &params, &cfg).unwrap();
            for s in &curve.samples {
                assert!((s[1] - 2.0 * (0.5 * s[0]).sin() / c).abs() < 1e-9, "{s:?}");
            }
            assert!(curve.monotone_p);
        }
    }

    #[test]
    fn constant_curve_inverts_to_constant() {
        for c in [1.0, 2.5] {
            let prof = herglotz_invert(&chords(c, 64), 1.0).unwrap();
            for n in &prof.nodes {
                assert!((n[1] - c).abs() / c < 1e-3, "{n:?}");
            }
        }
    }

    #[test]
    fn radial_round_trip() {
        let speed = ScalarField::radial_affine(2.0, -1.0);
        let params = ray_parameter_fan(&speed, 1.0, 64).unwrap();
        let curve = forward_travel_times(&speed, 1.0, &params, &RayConfig::new(1e-3, 4.0)).unwrap();
        let prof = herglotz_invert(&curve, 1.0).unwrap();
        assert!(prof.covered().0 < 0.3 && prof.covered().1 == 1.0);
        let worst = prof.nodes.iter().map(|n| (n[1] - (2.0 - n[0])).abs() / (2.0 - n[0])).fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
        assert!(prof.nodes.windows(2).all(|w| w[1][0] / w[1][1] > w[0][0] / w[0][1]));
        assert_eq!(prof.eval(0.5 * prof.covered().0), None);
    }

    #[test]
    fn noisy_times_stay_close() {
        let speed = ScalarField::radial_affine(2.0, -1.0);
        let params = ray_parameter_fan(&speed, 1.0, 64).unwrap();
        let curve = forward_travel_times(&speed, 1.0, &params, &RayConfig::new(1e-3, 4.0)).unwrap();
        let noisy: Vec<[f64; 2]> = curve
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| [s[0], s[1] * (1.0 + 1e-4 * ((k * 7919 % 13) as f64 / 6.0 - 1.0))])
            .collect();
        match TravelTimeCurve::new(noisy).and_then(|c| herglotz_invert(&c, 1.0)) {
            Ok(prof) => {
                let worst = prof.nodes.iter().map(|n| (n[1] - (2.0 - n[0])).abs() / (2.0 - n[0])).fold(0.0, f64::max);
                assert!(worst < 0.05, "{worst}");
            }
            Err(e) => assert!(matches!(e, Error::IllPosed(_)), "{e}"),
        }
    }

    #[test]
    fn hwz_violation_is_refused() {
        // r / c(r) decreases for r > 1/√3 when c = 1 + 3 r²
        let nodes: Vec<[f64; 2]> = (0..=40).map(|k| { let r = k as f64 / 40.0; [r, 1.0 + 3.0 * r * r] }).collect();
        let speed = ScalarField::Radial(crate::model::Profile1D::table(&nodes).unwrap());
        let err = forward_travel_times(&speed, 1.0, &[0.2], &RayConfig::new(1e-3, 4.0)).unwrap_err();
        assert!(matches!(err, Error::NotConvex(_)), "{err}");
    }

    #[test]
    fn non_monotone_slope_names_the_pair() {
        let c = TravelTimeCurve::new(vec![[0.1, 0.1], [0.2, 0.19], [0.3, 0.3]]).unwrap();
        assert!(!c.monotone_p);
        let err = herglotz_invert(&c, 1.0).unwrap_err().to_string();
        assert!(err.contains("2.000000e-1"), "{err}");
    }

    #[test]
    fn time_scaling_divides_speed() {
        let curve = chords(1.0, 32);
        let a = herglotz_invert(&curve, 1.0).unwrap();
        let b = herglotz_invert(&curve.scaled_times(4.0).unwrap(), 1.0).unwrap();
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] / 4.0 - y[1]).abs() < 1e-12 * x[1]);
        }
    }

    #[test]
    fn linear_gradient_layer_matches_closed_form() {
        // c = 1 + z: X = 2 sqrt(1 - p²)/p, T = 2 acosh(1/p)
        let prof = DepthProfile::new(vec![[0.0, 1.0], [5.0, 6.0]]).unwrap();
        let curve = layered_travel_times(&prof, &[0.9, 0.5, 0.2]).unwrap();
        assert!(curve.samples[0][0] < curve.samples[1][0]);
        for (s, p) in curve.samples.iter().zip([0.9f64, 0.5, 0.2]) {
            assert!((s[0] - 2.0 * (1.0 - p * p).sqrt() / p).abs() < 1e-12);
            assert!((s[1] - 2.0 * (1.0 / p).acosh()).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_layer_is_recovered_exactly() {
        let c = 1.7;
        let curve = OffsetCurve::new((1..=10).map(|k| [0.1 * k as f64, 0.1 * k as f64 / c]).collect()).unwrap();
        let out = layer_strip_invert(&curve, None).unwrap();
        assert_eq!(out.profile.nodes.len(), 1);
        assert!((out.profile.nodes[0][1] - c).abs() < 1e-14);
        assert_eq!(out.explained, 10);
    }

    fn two_slope() -> DepthProfile {
        let mut nodes = vec![[0.0, 1.0], [0.5, 1.5]];
        nodes.extend((1..=20).map(|k| {
            let z = 0.5 + 0.05 * k as f64;
            [z, 1.5 + 2.0 * (z - 0.5)]
        }));
        DepthProfile::new(nodes).unwrap()
    }

    #[test]
    fn two_slope_round_trip() {
        let truth = two_slope();
        // two near-grazing rays fix the top speed, then turning speeds evenly spaced up to 2.4
        let params: Vec<f64> = [1.0005, 1.001]
            .into_iter()
            .chain((0..128).map(|k| 1.0 + 1.4 * (k as f64 + 0.5) / 128.0))
            .map(|c| 1.0 / c)
            .collect();
        let curve = layered_travel_times(&truth, &params).unwrap();
        let out = layer_strip_invert(&curve, None).unwrap();
        assert!(out.max_time_misfit < 0.01);
        let worst = out
            .profile
            .nodes
            .iter()
            .map(|n| (n[1] - truth.eval(n[0]).unwrap()).abs() / n[1])
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
        assert!(out.profile.nodes.windows(2).all(|w| w[1][1] > w[0][1]));
    }

    #[test]
    fn low_velocity_zone_is_located() {
        let truth = DepthProfile::new(vec![[0.0, 1.0], [0.3, 1.3], [0.4, 1.1], [0.5, 1.1], [1.5, 3.1]]).unwrap();
        let params: Vec<f64> = (0..60).map(|k| (0.02 + 1.2 * k as f64 / 59.0).cos()).collect();
        let curve = layered_travel_times(&truth, &params).unwrap();
        match layer_strip_invert(&curve, None) {
            Err(Error::LowVelocityZone { top, bottom, .. }) => {
                assert!((top - 0.3).abs() < 0.03, "top {top}");
                assert!(bottom.is_some_and(|b| b > top), "{bottom:?}");
            }
            other => panic!("expected a low-velocity zone, got {other:?}"),
        }
    }

    #[test]
    fn swapped_modes_are_inconsistent() {
        let (p, s) = (chords(3f64.sqrt(), 32), chords(1.0, 32));
        let geo = InversionGeometry::Radial { radius: 1.0 };
        let (pp, ps) = invert_both_speeds(&p.samples, &s.samples, geo).unwrap();
        assert!((pp.nodes()[5][1] - 3f64.sqrt()).abs() < 0.01 && (ps.nodes()[5][1] - 1.0).abs() < 0.01);
        assert!(matches!(invert_both_speeds(&s.samples, &p.samples, geo), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn profile_csv_round_trip() {
        let prof = Profile::Radial(herglotz_invert(&chords(1.0, 64), 1.0).unwrap());
        let back = Profile::from_csv(&prof.to_csv()).unwrap();
        assert_eq!(back.nodes().len(), prof.nodes().len());
        let rep = compare(&back, &ScalarField::constant(1.0)).unwrap();
        assert!(rep.max_rel_err < 1e-3);
    }
}
