//! Strict convexity of foliations for conformal metrics `c^-2 dx^2`.
//!
//! A leaf is tested through the conformal second fundamental form
//! `II_e(ξ) − c⁻¹ ∂_ν c |ξ|²`, where `II_e` is the Euclidean form of the leaf
//! with respect to the viewing normal `ν`. A positive value means a geodesic
//! launched tangent to the leaf moves to the `ν` side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, SpeedField};
use crate::ray::flow::{rk4_step, PhasePoint};
use crate::vecn;

/// Values at or below this are not strictly convex.
pub const MARGIN_THRESHOLD: f64 = 1e-9;
/// Default lower bound for `|∇κ|` on sampled leaves.
pub const DEFAULT_GRAD_EPS: f64 = 1e-8;
/// Forms smaller than this are not spot-checked with a ray.
const SPOT_MIN_VALUE: f64 = 1e-6;
const SPOT_TIME: f64 = 0.01;

/// Conformal second fundamental form of a hypersurface with unit normal
/// `nu` at `x`, in the unit tangent direction `xi`, given the Euclidean form
/// value `ii_e` with respect to the same normal.
pub fn conformal_second_fundamental_form<const D: usize>(
    speed: &SpeedField,
    x: &[f64; D],
    xi: &[f64; D],
    nu: &[f64; D],
    ii_e: f64,
) -> Result<f64> {
    let xn = vecn::norm(xi);
    let nn = vecn::norm(nu);
    if (xn - 1.0).abs() > 1e-9 || (nn - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "tangent and normal must be unit vectors (|xi| = {xn}, |nu| = {nn})"
        )));
    }
    let ortho = vecn::dot(xi, nu);
    if ortho.abs() > 1e-9 {
        return Err(Error::Precondition(format!("tangent is not orthogonal to the normal (xi·nu = {ortho:e})")));
    }
    let (c, grad) = speed.eval_with_gradient(x)?;
    Ok(ii_e - vecn::dot(&grad, nu) / c)
}

/// Scalar function whose level sets are the leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelFunction {
    /// `|x|`
    Radius,
    /// `normal·x + offset`
    Affine { normal: Vec<f64>, offset: f64 },
    /// `xᵀ a x + b·x + c` with symmetric `a`.
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64>, c: f64 },
}

impl LevelFunction {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match self {
            LevelFunction::Radius => true,
            LevelFunction::Affine { normal, .. } => normal.len() == d,
            LevelFunction::Quadratic { a, b, .. } => {
                b.len() == d && a.len() == d && a.iter().all(|row| row.len() == d)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("level function coefficients do not match dimension {d}")))
        }
    }

    pub fn value<const D: usize>(&self, x: &[f64; D]) -> f64 {
        match self {
            LevelFunction::Radius => vecn::norm(x),
            LevelFunction::Affine { normal, offset } => offset + (0..D).map(|i| normal[i] * x[i]).sum::<f64>(),
            LevelFunction::Quadratic { a, b, c } => {
                let mut v = *c;
                for i in 0..D {
                    v += b[i] * x[i];
                    for j in 0..D {
                        v += a[i][j] * x[i] * x[j];
                    }
                }
                v
            }
        }
    }

    pub fn gradient<const D: usize>(&self, x: &[f64; D]) -> [f64; D] {
        match self {
            LevelFunction::Radius => {
                let r = vecn::norm(x);
                if r > 0.0 {
                    vecn::scale(x, 1.0 / r)
                } else {
                    [0.0; D]
                }
            }
            LevelFunction::Affine { normal, .. } => std::array::from_fn(|i| normal[i]),
            LevelFunction::Quadratic { a, b, .. } => {
                std::array::from_fn(|i| b[i] + (0..D).map(|j| (a[i][j] + a[j][i]) * x[j]).sum::<f64>())
            }
        }
    }

    /// `ξᵀ (Hess κ) ξ`.
    pub fn hessian_form<const D: usize>(&self, x: &[f64; D], xi: &[f64; D]) -> f64 {
        match self {
            LevelFunction::Radius => {
                let r = vecn::norm(x);
                let radial = vecn::dot(x, xi) / r;
                (vecn::dot(xi, xi) - radial * radial) / r
            }
            LevelFunction::Affine { .. } => 0.0,
            LevelFunction::Quadratic { a, .. } => {
                let mut v = 0.0;
                for i in 0..D {
                    for j in 0..D {
                        v += (a[i][j] + a[j][i]) * xi[i] * xi[j];
                    }
                }
                v
            }
        }
    }
}

/// Which side a leaf is viewed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Normal `∇κ/|∇κ|`, toward increasing `κ`.
    #[default]
    Increasing,
    Decreasing,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Increasing => 1.0,
            Orientation::Decreasing => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Foliation {
    pub kappa: LevelFunction,
    pub range: [f64; 2],
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default = "default_grad_eps")]
    pub grad_eps: f64,
}

fn default_grad_eps() -> f64 {
    DEFAULT_GRAD_EPS
}

impl Foliation {
    pub fn new(kappa: LevelFunction, range: [f64; 2]) -> Self {
        Self { kappa, range, orientation: Orientation::Increasing, grad_eps: DEFAULT_GRAD_EPS }
    }

    /// Concentric spheres `|x| = r`, `r ∈ [r_min, r_max]`, viewed from outside.
    pub fn spheres(r_min: f64, r_max: f64) -> Self {
        Self::new(LevelFunction::Radius, [r_min, r_max])
    }

    /// Planes `x_axis = C`, `C ∈ [c1, c2]`, viewed toward decreasing `x_axis`.
    pub fn planes<const D: usize>(axis: usize, c1: f64, c2: f64) -> Self {
        let mut normal = vec![0.0; D];
        normal[axis] = -1.0;
        Self::new(LevelFunction::Affine { normal, offset: 0.0 }, [-c2, -c1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub leaves: usize,
    pub points: usize,
    /// Tangent directions per point; planar leaves have a single one.
    pub directions: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { leaves: 32, points: 64, directions: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictlyConvex,
    /// Every value lies within the margin threshold of zero.
    FlatWithinTolerance,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub leaf: f64,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSummary {
    pub level: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub leaves: usize,
    pub points_per_leaf: usize,
    pub directions: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A short ray launched tangent to a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub leaf: f64,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub value: f64,
    /// Change of `κ` after time 0.01, signed by the orientation.
    pub displacement: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub test: String,
    pub verdict: Verdict,
    /// Smallest sampled value.
    pub margin: f64,
    pub threshold: f64,
    pub leaves: Vec<LeafSummary>,
    /// Sample with the smallest value, then the first failing sample (in
    /// leaf order) when it differs.
    pub witnesses: Vec<Witness>,
    /// Leaf parameter where the value first drops to the threshold, located
    /// by bisection between sampled leaves.
    pub onset: Option<f64>,
    pub samples: SampleCounts,
    pub side_conditions: Vec<SideCondition>,
    pub spot_checks: Vec<SpotCheck>,
    pub notes: Vec<String>,
}

impl ConvexityReport {
    pub fn is_strictly_convex(&self) -> bool {
        self.verdict == Verdict::StrictlyConvex
    }

    pub fn max_abs_value(&self) -> f64 {
        self.leaves
            .iter()
            .map(|l| l.min_value.abs().max(l.max_value.abs()))
            .fold(0.0, f64::max)
    }
}

fn levels(range: [f64; 2], n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (range[0] + range[1])];
    }
    (0..n)
        .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Evenly spread unit vectors: a circle in 2D, a Fibonacci sphere in 3D.
pub fn unit_directions<const D: usize>(n: usize) -> Result<Vec<[f64; D]>> {
    match D {
        2 => Ok((0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let v = [a.cos(), a.sin()];
                std::array::from_fn(|k| v[k])
            })
            .collect()),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    let v = [r * phi.cos(), r * phi.sin(), z];
                    std::array::from_fn(|k| v[k])
                })
                .collect())
        }
        _ => Err(Error::Unsupported(format!("convexity checks run in 2 or 3 dimensions, not {D}"))),
    }
}

/// Unit tangent directions at a point with normal `n`, over half a turn.
fn tangent_directions<const D: usize>(n: &[f64; D], count: usize) -> Vec<[f64; D]> {
    let basis = vecn::tangent_basis(n);
    if D == 2 {
        return basis;
    }
    (0..count.max(1))
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / count.max(1) as f64;
            vecn::add(&vecn::scale(&basis[0], a.cos()), &vecn::scale(&basis[1], a.sin()))
        })
        .collect()
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Points of the leaf `κ = level` inside `domain` (when given).
fn leaf_points<const D: usize>(
    kappa: &LevelFunction,
    level: f64,
    domain: Option<&Domain>,
    count: usize,
) -> Result<Vec<[f64; D]>> {
    let inside = |x: &[f64; D]| -> Result<bool> {
        match domain {
            Some(d) => Ok(d.signed_distance(x)? <= 1e-9),
            None => Ok(true),
        }
    };
    if let LevelFunction::Radius = kappa {
        let mut out = Vec::with_capacity(count);
        for w in unit_directions::<D>(count)? {
            let x = vecn::scale(&w, level);
            if inside(&x)? {
                out.push(x);
            }
        }
        return Ok(out);
    }
    let domain = domain.ok_or_else(|| Error::Config("non-spherical leaves need a domain to bound them".into()))?;
    let (lo, hi) = domain.bounds::<D>()?;
    let bases = [2, 3, 5];
    let mut out = Vec::with_capacity(count);
    for i in 1..=count * 16 {
        if out.len() == count {
            break;
        }
        let mut x: [f64; D] = std::array::from_fn(|k| lo[k] + (hi[k] - lo[k]) * halton(i, bases[k]));
        let mut converged = false;
        for _ in 0..60 {
            let f = kappa.value(&x) - level;
            if f.abs() < 1e-13 * (1.0 + level.abs()) {
                converged = true;
                break;
            }
            let g = kappa.gradient(&x);
            let g2 = vecn::dot(&g, &g);
            if g2 < 1e-300 {
                break;
            }
            x = vecn::axpy(&x, -f / g2, &g);
        }
        if converged && inside(&x)? {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Sample<const D: usize> {
    level: f64,
    x: [f64; D],
    xi: [f64; D],
    value: f64,
}

struct LeafResult<const D: usize> {
    summary: LeafSummary,
    min: Option<Sample<D>>,
    first_fail: Option<Sample<D>>,
}

fn summarize<const D: usize>(level: f64, points: usize, samples: Vec<Sample<D>>) -> LeafResult<D> {
    let mut min: Option<Sample<D>> = None;
    let mut first_fail = None;
    let mut max_value = f64::NEG_INFINITY;
    for s in samples {
        max_value = max_value.max(s.value);
        if first_fail.is_none() && s.value <= MARGIN_THRESHOLD {
            first_fail = Some(s);
        }
        if min.as_ref().is_none_or(|m| s.value < m.value) {
            min = Some(s);
        }
    }
    LeafResult {
        summary: LeafSummary {
            level,
            min_value: min.as_ref().map_or(f64::NAN, |m| m.value),
            max_value,
            points,
        },
        min,
        first_fail,
    }
}

impl<const D: usize> Sample<D> {
    fn witness(&self) -> Witness {
        Witness { leaf: self.level, point: self.x.to_vec(), direction: self.xi.to_vec(), value: self.value }
    }
}

fn assemble<const D: usize>(
    test: &str,
    results: Vec<LeafResult<D>>,
    counts: SampleCounts,
    onset: impl Fn(usize) -> Result<Option<f64>>,
) -> Result<(ConvexityReport, Option<usize>)> {
    let mut witnesses = Vec::new();
    let mut margin = f64::INFINITY;
    let mut global_min: Option<&Sample<D>> = None;
    for r in &results {
        if let Some(m) = &r.min {
            if m.value < margin {
                margin = m.value;
                global_min = Some(m);
            }
        }
    }
    let Some(gmin) = global_min else {
        return Err(Error::Precondition("no leaf point lies inside the domain".into()));
    };
    witnesses.push(gmin.witness());
    let first_fail_leaf = results.iter().position(|r| r.first_fail.is_some());
    if let Some(k) = first_fail_leaf {
        let w = results[k].first_fail.as_ref().expect("position found a failure").witness();
        if w != witnesses[0] {
            witnesses.push(w);
        }
    }
    let verdict = if margin > MARGIN_THRESHOLD {
        Verdict::StrictlyConvex
    } else if results.iter().all(|r| r.summary.max_value.abs() <= MARGIN_THRESHOLD) && margin >= -MARGIN_THRESHOLD {
        Verdict::FlatWithinTolerance
    } else {
        Verdict::Violated
    };
    let onset = match (verdict, first_fail_leaf) {
        (Verdict::Violated, Some(k)) if k > 0 => onset(k)?,
        _ => None,
    };
    Ok((
        ConvexityReport {
            test: test.to_string(),
            verdict,
            margin,
            threshold: MARGIN_THRESHOLD,
            leaves: results.into_iter().map(|r| r.summary).collect(),
            witnesses,
            onset,
            samples: counts,
            side_conditions: Vec::new(),
            spot_checks: Vec::new(),
            notes: Vec::new(),
        },
        first_fail_leaf,
    ))
}

/// Bisection for the zero crossing of `f - threshold` on `[a, b]` with
/// `f(a) > threshold >= f(b)`.
fn bisect_onset(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f(m)? > MARGIN_THRESHOLD {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Generalized Herglotz condition `∂_r (r / c) > 0` on the shell
/// `r_min ≤ |x| ≤ r_max`.
pub fn check_hwz<const D: usize>(
    speed: &SpeedField,
    r_min: f64,
    r_max: f64,
    samples: &Sampling,
) -> Result<ConvexityReport> {
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::Precondition(format!("need 0 < r_min < R, got [{r_min}, {r_max}]")));
    }
    let dirs = unit_directions::<D>(samples.points)?;
    let fd = !speed.has_analytic_gradient();
    let h = 1e-4 * r_max;
    let deriv = |r: f64, w: &[f64; D]| -> Result<f64> {
        let x = vecn::scale(w, r);
        let (c, grad) = speed.eval_with_gradient(&x)?;
        let dc = if fd {
            (speed.eval(&vecn::scale(w, r + h))? - speed.eval(&vecn::scale(w, r - h))?) / (2.0 * h)
        } else {
            vecn::dot(&grad, w)
        };
        Ok(1.0 / c - r * dc / (c * c))
    };
    let rs = levels([r_min, r_max], samples.leaves);
    let results = rs
        .par_iter()
        .map(|&r| {
            let s = dirs
                .iter()
                .map(|w| Ok(Sample { level: r, x: vecn::scale(w, r), xi: *w, value: deriv(r, w)? }))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(r, dirs.len(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let counts = SampleCounts {
        leaves: rs.len(),
        points_per_leaf: dirs.len(),
        directions: 1,
        total: rs.len() * dirs.len(),
    };
    let first_fail = results.iter().find_map(|r| r.first_fail.as_ref().map(|s| s.xi));
    let spots = leaf_spot_checks(speed, &LevelFunction::Radius, Orientation::Increasing, &results)?;
    let (mut report, _) = assemble("hwz", results, counts, |k| {
        let w = first_fail.expect("onset only requested after a failure");
        bisect_onset(rs[k - 1], rs[k], |r| deriv(r, &w)).map(Some)
    })?;
    report.spot_checks = spots;
    report.notes.push(format!(
        "derivative of c along the radius taken {}",
        if fd { "by central differences" } else { "from the analytic gradient" }
    ));
    Ok(report)
}

/// Planes `x_axis = C`, `C ∈ [c1, c2]`: strictly convex iff `∂c/∂x_axis > 0`.
pub fn check_plane_foliation<const D: usize>(
    speed: &SpeedField,
    axis: usize,
    c1: f64,
    c2: f64,
    domain: &Domain,
    samples: &Sampling,
) -> Result<ConvexityReport> {
    if !(c1 < c2) {
        return Err(Error::Precondition(format!("need C1 < C2, got [{c1}, {c2}]")));
    }
    if axis >= D {
        return Err(Error::Config(format!("axis {axis} out of range for dimension {D}")));
    }
    let foliation = Foliation::planes::<D>(axis, c1, c2);
    let mut e = [0.0; D];
    e[axis] = 1.0;
    let t = vecn::tangent_basis(&e)[0];
    let cs = levels([c1, c2], samples.leaves);
    let results = cs
        .par_iter()
        .map(|&c| {
            let pts = leaf_points::<D>(&foliation.kappa, -c, Some(domain), samples.points)?;
            let s = pts
                .iter()
                .map(|x| Ok(Sample { level: c, x: *x, xi: t, value: vecn::dot(&speed.gradient(x)?, &e) }))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(c, pts.len(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let counts = counts_of(&results, 1);
    let first_fail = results.iter().find_map(|r| r.first_fail.as_ref().map(|s| s.x));
    let spots = leaf_spot_checks(speed, &foliation.kappa, Orientation::Increasing, &results)?;
    let (mut report, _) = assemble("planes", results, counts, |k| {
        let x0 = first_fail.expect("onset only requested after a failure");
        bisect_onset(cs[k - 1], cs[k], |c| {
            let mut x = x0;
            x[axis] = c;
            Ok(vecn::dot(&speed.gradient(&x)?, &e))
        })
        .map(Some)
    })?;
    report.spot_checks = spots;
    report.notes.push(format!("value is dc/dx_{axis}; leaves viewed toward decreasing x_{axis}"));
    Ok(report)
}

fn counts_of<const D: usize>(results: &[LeafResult<D>], directions: usize) -> SampleCounts {
    let points = results.iter().map(|r| r.summary.points).max().unwrap_or(0);
    SampleCounts {
        leaves: results.len(),
        points_per_leaf: points,
        directions,
        total: results.iter().map(|r| r.summary.points).sum::<usize>() * directions,
    }
}

/// Conformal second fundamental form over the leaves of `foliation`
/// restricted to `domain`.
pub fn check_foliation<const D: usize>(
    speed: &SpeedField,
    foliation: &Foliation,
    domain: &Domain,
    samples: &Sampling,
) -> Result<ConvexityReport> {
    foliation.kappa.check_dim(D)?;
    let [a, b] = foliation.range;
    if !(a < b) {
        return Err(Error::Precondition(format!("foliation range must be increasing, got [{a}, {b}]")));
    }
    let sign = foliation.orientation.sign();
    let kappa = &foliation.kappa;
    let qs = levels(foliation.range, samples.leaves);
    let form = |x: &[f64; D], xi: &[f64; D]| -> Result<f64> {
        let g = kappa.gradient(x);
        let gn = vecn::norm(&g);
        let nu = vecn::scale(&g, sign / gn);
        let ii = sign * kappa.hessian_form(x, xi) / gn;
        conformal_second_fundamental_form(speed, x, xi, &nu, ii)
    };
    let results = qs
        .par_iter()
        .map(|&q| {
            let pts = leaf_points::<D>(kappa, q, Some(domain), samples.points)?;
            let mut s = Vec::new();
            for x in &pts {
                let g = kappa.gradient(x);
                let gn = vecn::norm(&g);
                if !(gn > foliation.grad_eps) {
                    return Err(Error::DegenerateFoliation { point: x.to_vec(), grad_norm: gn });
                }
                for xi in tangent_directions(&vecn::scale(&g, 1.0 / gn), samples.directions) {
                    s.push(Sample { level: q, x: *x, xi, value: form(x, &xi)? });
                }
            }
            Ok(summarize(q, pts.len(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let dirs = if D == 2 { 1 } else { samples.directions.max(1) };
    let counts = counts_of(&results, dirs);
    let fail = results.iter().find_map(|r| r.first_fail.as_ref().map(|s| (s.x, s.xi)));
    let spots = leaf_spot_checks(speed, kappa, foliation.orientation, &results)?;
    let (mut report, _) = assemble("level_sets", results, counts, |k| {
        // follow the failing point along the gradient flow to neighbouring leaves
        let (x0, xi0) = fail.expect("onset only requested after a failure");
        bisect_onset(qs[k - 1], qs[k], |q| {
            let mut x = x0;
            for _ in 0..60 {
                let f = kappa.value(&x) - q;
                if f.abs() < 1e-14 {
                    break;
                }
                let g = kappa.gradient(&x);
                x = vecn::axpy(&x, -f / vecn::dot(&g, &g), &g);
            }
            let n = vecn::normalize(&kappa.gradient(&x));
            let xi = vecn::normalize(&vecn::axpy(&xi0, -vecn::dot(&xi0, &n), &n));
            form(&x, &xi)
        })
        .map(Some)
    })?;
    report.side_conditions = side_conditions::<D>(kappa, foliation, domain, samples)?;
    report.spot_checks = spots;
    report.notes.push(format!(
        "verification region read as the part of the domain where kappa lies in [{a}, {b}]"
    ));
    Ok(report)
}

fn side_conditions<const D: usize>(
    kappa: &LevelFunction,
    foliation: &Foliation,
    domain: &Domain,
    samples: &Sampling,
) -> Result<Vec<SideCondition>> {
    let mut out = vec![SideCondition {
        name: "nonvanishing_gradient".into(),
        passed: true,
        detail: format!("|grad kappa| > {:e} at every sample", foliation.grad_eps),
    }];
    let [a, b] = foliation.range;
    if a <= 0.0 && 0.0 <= b {
        let zero = if let LevelFunction::Radius = kappa {
            vec![[0.0; D]]
        } else {
            leaf_points::<D>(kappa, 0.0, Some(domain), samples.points)?
        };
        let mut interior = None;
        for x in &zero {
            let d = domain.signed_distance(x)?;
            if d < -1e-9 {
                interior = Some((x.to_vec(), d));
                break;
            }
        }
        out.push(match interior {
            None => SideCondition {
                name: "zero_leaf_on_boundary".into(),
                passed: true,
                detail: format!("{} samples of the zero leaf, none interior", zero.len()),
            },
            Some((x, d)) => SideCondition {
                name: "zero_leaf_on_boundary".into(),
                passed: false,
                detail: format!("zero-leaf sample {x:?} lies inside the domain (signed distance {d:e})"),
            },
        });
    }
    Ok(out)
}

/// One short tangent ray per leaf, launched at the leaf's minimizing sample.
fn leaf_spot_checks<const D: usize>(
    speed: &SpeedField,
    kappa: &LevelFunction,
    orientation: Orientation,
    results: &[LeafResult<D>],
) -> Result<Vec<SpotCheck>> {
    let mut out = Vec::new();
    for r in results {
        if let Some(m) = &r.min {
            if let Some(s) = spot_check::<D>(speed, kappa, orientation, &m.witness())? {
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn spot_check<const D: usize>(
    speed: &SpeedField,
    kappa: &LevelFunction,
    orientation: Orientation,
    w: &Witness,
) -> Result<Option<SpotCheck>> {
    if w.value.abs() < SPOT_MIN_VALUE {
        return Ok(None);
    }
    let x: [f64; D] = std::array::from_fn(|i| w.point[i]);
    let xi: [f64; D] = std::array::from_fn(|i| w.direction[i]);
    let k0 = kappa.value(&x);
    let Ok(mut p) = PhasePoint::launch(speed, x, xi) else {
        return Ok(None);
    };
    let steps = 100;
    let dt = SPOT_TIME / steps as f64;
    for _ in 0..steps {
        match rk4_step(speed, &p, dt) {
            Ok(q) => p = q,
            Err(_) => return Ok(None),
        }
    }
    let disp = orientation.sign() * (kappa.value(&p.x) - k0);
    Ok(Some(SpotCheck {
        leaf: w.leaf,
        point: w.point.clone(),
        direction: w.direction.clone(),
        value: w.value,
        displacement: disp,
        consistent: disp * w.value > 0.0,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Profile1D, ScalarField};

    fn cone() -> ScalarField {
        ScalarField::radial_affine(0.0, 1.0)
    }

    #[test]
    fn round_sphere_at_unit_speed() {
        let r = 0.7;
        let x = [r, 0.0, 0.0];
        let v = conformal_second_fundamental_form(&ScalarField::constant(1.0), &x, &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], 1.0 / r)
            .unwrap();
        assert!((v - 1.0 / r).abs() < 1e-15);
    }

    #[test]
    fn spheres_are_flat_for_the_cone_metric() {
        let r = 0.7;
        let x = [0.0, r, 0.0];
        let v = conformal_second_fundamental_form(&cone(), &x, &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], 1.0 / r).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn non_orthogonal_tangent_is_rejected() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let err = conformal_second_fundamental_form(&ScalarField::constant(1.0), &[1.0, 0.0], &[s, s], &[1.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn plane_sign_matches_bending() {
        // c = 1 + z, plane z = 0 viewed toward decreasing z
        let c = ScalarField::depth_affine(1.0, 1.0);
        let x = [0.0, 0.0, 0.0];
        let v = conformal_second_fundamental_form(&c, &x, &[1.0, 0.0, 0.0], &[0.0, 0.0, -1.0], 0.0).unwrap();
        assert!(v > 0.0);
        let mut p = PhasePoint::launch(&c, x, [1.0, 0.0, 0.0]).unwrap();
        for _ in 0..100 {
            p = rk4_step(&c, &p, 1e-3).unwrap();
        }
        assert!(p.x[2] < 0.0);
    }

    #[test]
    fn hwz_constant_speed() {
        let rep = check_hwz::<2>(&ScalarField::constant(2.0), 0.1, 1.0, &Sampling::default()).unwrap();
        assert!(rep.is_strictly_convex());
        assert!((rep.margin - 0.5).abs() < 1e-14);
    }

    #[test]
    fn hwz_margin_for_decreasing_speed() {
        let rep = check_hwz::<2>(&ScalarField::radial_affine(2.0, -1.0), 0.1, 1.0, &Sampling::default()).unwrap();
        assert!(rep.is_strictly_convex());
        let expected = 2.0 / (1.9f64 * 1.9);
        assert!((rep.margin - expected).abs() < 1e-12, "{} vs {expected}", rep.margin);
        assert!(rep.spot_checks.iter().all(|s| s.consistent));
    }

    #[test]
    fn hwz_violation_onset_near_one() {
        let c = ScalarField::Radial(Profile1D::Reciprocal { a: 2.0, b: -1.0 });
        let rep = check_hwz::<2>(&c, 0.1, 1.5, &Sampling::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Violated);
        let onset = rep.onset.unwrap();
        assert!((onset - 1.0).abs() < 1e-6, "onset {onset}");
        assert!((rep.witnesses[1].leaf - 1.0).abs() < 0.05);
    }

    #[test]
    fn hwz_by_differences_agrees() {
        let grid = crate::model::Grid2D::new([-1.2, -1.2], 0.01, 241, 241).unwrap();
        let f = crate::model::GridField::sample(grid, crate::model::GridInterp::Bicubic, |x| {
            2.0 - (x[0] * x[0] + x[1] * x[1]).sqrt()
        })
        .unwrap();
        let c = ScalarField::Grid(f);
        assert!(!c.has_analytic_gradient());
        let rep = check_hwz::<2>(&c, 0.3, 1.0, &Sampling::default()).unwrap();
        assert!(rep.is_strictly_convex());
        // d/dr (r / (2 - r)) = 2 / (2 - r)^2 is smallest at r = 0.3
        let expected = 2.0 / (1.7f64 * 1.7);
        assert!((rep.margin - expected).abs() < 1e-3, "{} vs {expected}", rep.margin);
    }

    #[test]
    fn planes_follow_depth_derivative() {
        let dom = Domain::unit_box::<3>();
        let rep = check_plane_foliation::<3>(&ScalarField::depth_affine(1.0, 1.0), 2, 0.0, 1.0, &dom, &Sampling::default()).unwrap();
        assert!(rep.is_strictly_convex());
        assert!((rep.margin - 1.0).abs() < 1e-14);
        assert!(rep.spot_checks.iter().all(|s| s.consistent));
        let flat = check_plane_foliation::<3>(&ScalarField::constant(1.0), 2, 0.0, 1.0, &dom, &Sampling::default()).unwrap();
        assert_eq!(flat.verdict, Verdict::FlatWithinTolerance);
        assert!(!flat.is_strictly_convex());
    }

    #[test]
    fn tabulated_depth_profile_monotonicity() {
        let dom = Domain::unit_box::<2>();
        let inc = ScalarField::Depth(Profile1D::table(&[[0.0, 1.0], [0.3, 1.2], [0.6, 1.5], [1.0, 2.0]]).unwrap());
        assert!(check_plane_foliation::<2>(&inc, 1, 0.0, 1.0, &dom, &Sampling::default()).unwrap().is_strictly_convex());
        let dip = ScalarField::Depth(Profile1D::table(&[[0.0, 1.0], [0.3, 1.4], [0.6, 1.2], [1.0, 2.0]]).unwrap());
        let rep = check_plane_foliation::<2>(&dip, 1, 0.0, 1.0, &dom, &Sampling::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Violated);
        let onset = rep.onset.unwrap();
        assert!(onset > 0.2 && onset < 0.4, "onset {onset}");
    }

    #[test]
    fn radius_level_sets_agree_with_hwz() {
        let c = ScalarField::radial_affine(2.0, -1.0);
        let rep = check_foliation::<2>(&c, &Foliation::spheres(0.1, 1.0), &Domain::disk(1.0), &Sampling::default()).unwrap();
        assert!(rep.is_strictly_convex());
        // 1/r + 1/(2 - r) is smallest on the outer leaf
        assert!((rep.margin - 2.0).abs() < 1e-12, "{}", rep.margin);
        assert!(rep.spot_checks.iter().all(|s| s.consistent));
        assert_eq!(rep.samples.total, 32 * 64);
    }

    #[test]
    fn depth_level_sets_agree_with_planes() {
        let dom = Domain::unit_box::<3>();
        let c = ScalarField::depth_affine(1.0, 1.0);
        let f = Foliation::new(LevelFunction::Affine { normal: vec![0.0, 0.0, -1.0], offset: 0.0 }, [-1.0, 0.0]);
        let rep = check_foliation::<3>(&c, &f, &dom, &Sampling { leaves: 8, points: 16, directions: 4 }).unwrap();
        assert!(rep.is_strictly_convex());
        assert!((rep.margin - 0.5).abs() < 1e-12);
        assert!(rep.spot_checks.iter().all(|s| s.consistent));
    }

    #[test]
    fn cone_metric_leaves_are_flat() {
        let rep = check_foliation::<3>(&cone(), &Foliation::spheres(0.2, 1.0), &Domain::disk(1.0), &Sampling::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::FlatWithinTolerance);
        assert!(rep.max_abs_value() <= 1e-10);
        assert_eq!(rep.samples.total, 32 * 64 * 16);
    }

    #[test]
    fn quadratic_level_sets_match_radius() {
        let quad = LevelFunction::Quadratic { a: vec![vec![1.0, 0.0], vec![0.0, 1.0]], b: vec![0.0, 0.0], c: 0.0 };
        let c = ScalarField::constant(1.0);
        let rep = check_foliation::<2>(&c, &Foliation::new(quad, [0.04, 0.81]), &Domain::disk(1.0), &Sampling::default())
            .unwrap();
        assert!(rep.is_strictly_convex());
        // leaf |x|^2 = 0.81 has curvature 1/0.9
        assert!((rep.margin - 1.0 / 0.9).abs() < 1e-9);
    }

    #[test]
    fn degenerate_gradient_is_reported() {
        let f = Foliation::new(LevelFunction::Radius, [0.0, 1.0]);
        let err = check_foliation::<2>(&ScalarField::constant(1.0), &f, &Domain::disk(1.0), &Sampling::default());
        assert!(matches!(err, Err(Error::DegenerateFoliation { .. })));
    }

    #[test]
    fn zero_leaf_inside_the_domain_is_flagged() {
        let f = Foliation::new(LevelFunction::Affine { normal: vec![0.0, -1.0], offset: 0.5 }, [-0.5, 0.5]);
        let rep = check_foliation::<2>(&ScalarField::depth_affine(1.0, 1.0), &f, &Domain::unit_box::<2>(), &Sampling::default())
            .unwrap();
        let zc = rep.side_conditions.iter().find(|s| s.name == "zero_leaf_on_boundary").unwrap();
        assert!(!zc.passed);
    }

    #[test]
    fn level_function_json() {
        let k = LevelFunction::from_json(r#"{"kind": "affine", "normal": [0, -1], "offset": 0}"#).unwrap();
        assert_eq!(k.value(&[0.3, 0.25]), -0.25);
    }
}
