//! Model file checks: positivity at nodes and between them, `c_p > c_s`,
//! and coarse smoothness indicators.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use elastic_lens::model::file::{MaterialSpec, ValueOrField};
use elastic_lens::model::{Domain, FieldSpec, Model, ModelFile, ScalarField};
use elastic_lens::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub field: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub errors: usize,
    pub warnings: usize,
    /// Points sampled between nodes.
    pub samples: usize,
    pub findings: Vec<Finding>,
}

/// Sampling density of the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSampling {
    /// Lattice points per axis over the domain (planar models).
    pub lattice: usize,
    /// Lattice points per axis for 3D boxes.
    pub lattice_3d: usize,
    /// Sub-samples per axis inside each cell of a grid field.
    pub samples_per_cell: usize,
    /// Adjacent grid nodes differing by more than this fraction are reported.
    pub max_node_jump: f64,
}

impl Default for ValidateSampling {
    fn default() -> Self {
        Self { lattice: 64, lattice_3d: 16, samples_per_cell: 4, max_node_jump: 0.5 }
    }
}

/// Most node findings listed per field; the rest are counted.
const NODE_FINDINGS: usize = 10;

struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, severity: Severity, field: &str, message: String) -> &mut Finding {
        self.0.push(Finding { severity, field: field.to_string(), message, node: None, point: None });
        self.0.last_mut().expect("just pushed")
    }
}

pub fn validate_file(path: &Path, sampling: &ValidateSampling) -> anyhow::Result<ValidationReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let spec: ModelFile =
        serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
    Ok(validate_spec(spec, sampling))
}

pub fn validate_spec(spec: ModelFile, sampling: &ValidateSampling) -> ValidationReport {
    let mut f = Findings(Vec::new());
    if let Some(s) = &spec.speed {
        node_checks(&mut f, "speed", s, sampling.max_node_jump);
    }
    if let Some(MaterialSpec { lambda, mu, rho }) = &spec.material {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("rho", rho)] {
            match v {
                ValueOrField::Value(c) if !(*c > 0.0) => {
                    f.push(Severity::Error, name, format!("{name} must be positive, got {c}"));
                }
                ValueOrField::Value(_) => {}
                ValueOrField::Field(s) => node_checks(&mut f, name, s, sampling.max_node_jump),
            }
        }
    }
    let mut samples = 0;
    if !f.0.iter().any(|x| x.severity == Severity::Error) {
        match Model::from_spec(spec) {
            Err(e) => {
                f.push(Severity::Error, "model", e.to_string());
            }
            Ok(model) => samples = sampled_checks(&mut f, &model, sampling),
        }
    }
    let errors = f.0.iter().filter(|x| x.severity == Severity::Error).count();
    let warnings = f.0.iter().filter(|x| x.severity == Severity::Warning).count();
    ValidationReport { passed: errors == 0, errors, warnings, samples, findings: f.0 }
}

fn node_checks(f: &mut Findings, name: &str, spec: &FieldSpec, max_jump: f64) {
    let mut bad = 0;
    match spec {
        FieldSpec::Constant { c } if !(*c > 0.0) => {
            f.push(Severity::Error, name, format!("{name} must be positive, got {c}"));
        }
        FieldSpec::Radial { profile } | FieldSpec::Depth { profile, .. } => {
            for (k, [_, v]) in profile.iter().enumerate().filter(|(_, n)| !(n[1] > 0.0)) {
                bad += 1;
                if bad <= NODE_FINDINGS {
                    f.push(Severity::Error, name, format!("{name} must be positive at node {k}, got {v}")).node =
                        Some(vec![k]);
                }
            }
        }
        FieldSpec::Grid { values, .. } => {
            let mut jump = (0.0f64, (0, 0));
            for (j, row) in values.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    if !(v > 0.0) {
                        bad += 1;
                        if bad <= NODE_FINDINGS {
                            f.push(Severity::Error, name, format!("{name} must be positive at node ({i}, {j}), got {v}"))
                                .node = Some(vec![i, j]);
                        }
                    }
                    let mut rel = |w: f64| {
                        let r = (v - w).abs() / v.abs().min(w.abs());
                        if r > jump.0 {
                            jump = (r, (i, j));
                        }
                    };
                    if let Some(&w) = row.get(i + 1) {
                        rel(w);
                    }
                    if let Some(&w) = values.get(j + 1).and_then(|r| r.get(i)) {
                        rel(w);
                    }
                }
            }
            if bad == 0 && jump.0 > max_jump {
                let (i, j) = jump.1;
                f.push(
                    Severity::Warning,
                    name,
                    format!("adjacent nodes differ by {:.0}% next to node ({i}, {j}); the grid may be too coarse", 100.0 * jump.0),
                )
                .node = Some(vec![i, j]);
            }
        }
        _ => {}
    }
    if bad > NODE_FINDINGS {
        f.push(Severity::Error, name, format!("{} more non-positive nodes", bad - NODE_FINDINGS));
    }
}

fn domain_points(domain: &Domain, sampling: &ValidateSampling) -> Vec<Vec<f64>> {
    let grid = |lo: &[f64], hi: &[f64], n: usize| -> Vec<Vec<f64>> {
        let n = n.max(2);
        let axis = |a: usize, k: usize| lo[a] + (hi[a] - lo[a]) * k as f64 / (n - 1) as f64;
        let mut pts = Vec::new();
        if lo.len() == 2 {
            for j in 0..n {
                for i in 0..n {
                    pts.push(vec![axis(0, i), axis(1, j)]);
                }
            }
        } else {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        pts.push(vec![axis(0, i), axis(1, j), axis(2, k)]);
                    }
                }
            }
        }
        pts
    };
    match domain {
        Domain::Disk { radius } => grid(&[-radius, -radius], &[*radius, *radius], sampling.lattice)
            .into_iter()
            .filter(|p| p[0].hypot(p[1]) <= *radius)
            .collect(),
        Domain::Box { lo, hi } if lo.len() == 2 => grid(lo, hi, sampling.lattice),
        Domain::Box { lo, hi } => grid(lo, hi, sampling.lattice_3d),
    }
}

fn grid_cell_points(field: &ScalarField, per_cell: usize) -> Vec<Vec<f64>> {
    let ScalarField::Grid(gf) = field else {
        return Vec::new();
    };
    let g = gf.grid;
    let m = per_cell.max(1);
    let (nx, ny) = ((g.nx - 1) * m + 1, (g.ny - 1) * m + 1);
    let step = g.h / m as f64;
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| vec![g.origin[0] + i as f64 * step, g.origin[1] + j as f64 * step]))
        .collect()
}

fn eval_dyn(field: &ScalarField, x: &[f64]) -> elastic_lens::Result<(f64, Vec<f64>)> {
    match *x {
        [a, b] => field.eval_with_gradient(&[a, b]).map(|(v, g)| (v, g.to_vec())),
        [a, b, c] => field.eval_with_gradient(&[a, b, c]).map(|(v, g)| (v, g.to_vec())),
        _ => Err(Error::Shape(format!("cannot evaluate at a {}-point", x.len()))),
    }
}

/// Positivity between nodes with the first witness point, and the largest
/// relative gradient over the domain.
fn field_scan(f: &mut Findings, name: &str, field: &ScalarField, pts: &[Vec<f64>], scale: f64) -> Option<Vec<f64>> {
    let mut witness: Option<(Vec<f64>, String)> = None;
    let mut failures = 0;
    let mut steepest = (0.0f64, Vec::new());
    let mut values = Vec::with_capacity(pts.len());
    for p in pts {
        match eval_dyn(field, p) {
            Ok((v, g)) => {
                let rel = g.iter().map(|x| x * x).sum::<f64>().sqrt() * scale / v;
                if rel > steepest.0 {
                    steepest = (rel, p.clone());
                }
                values.push(v);
            }
            Err(e) => {
                failures += 1;
                if witness.is_none() {
                    witness = Some((p.clone(), e.to_string()));
                }
                values.push(f64::NAN);
            }
        }
    }
    if let Some((p, msg)) = witness {
        let what = if msg.contains("non-positive") { "must be positive" } else { "is not defined" };
        let finding = f.push(
            Severity::Error,
            name,
            format!("{name} {what} at {failures} of {} sample points; first: {msg}", pts.len()),
        );
        finding.point = Some(p);
        return None;
    }
    if steepest.0 > 0.0 {
        f.push(
            Severity::Info,
            name,
            format!("largest |grad {name}| / {name} times the domain size is {:.3e}", steepest.0),
        )
        .point = Some(steepest.1);
    }
    Some(values)
}

fn sampled_checks(f: &mut Findings, model: &Model, sampling: &ValidateSampling) -> usize {
    let pts = domain_points(&model.domain, sampling);
    let scale = match &model.domain {
        Domain::Disk { radius } => 2.0 * radius,
        Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
    };
    let mut count = pts.len();
    let mut scan = |f: &mut Findings, name: &str, field: &ScalarField| {
        let cells = grid_cell_points(field, sampling.samples_per_cell);
        count += cells.len();
        if !cells.is_empty() {
            field_scan(f, name, field, &cells, scale)?;
        }
        field_scan(f, name, field, &pts, scale)
    };
    if let Some(s) = &model.speed {
        scan(f, "speed", s);
    }
    if let Some(m) = &model.material {
        let mu = scan(f, "mu", &m.mu);
        let lambda = scan(f, "lambda", &m.lambda);
        let rho = scan(f, "rho", &m.rho);
        if let (Some(mu), Some(lambda), Some(_)) = (mu, lambda, rho) {
            // c_p > c_s  <=>  lambda + mu > 0
            let worst = pts.iter().zip(mu.iter().zip(&lambda)).map(|(p, (m, l))| (l + m, p)).min_by(|a, b| a.0.total_cmp(&b.0));
            match worst {
                Some((gap, p)) if !(gap > 0.0) => {
                    f.push(Severity::Error, "material", "c_p must exceed c_s (lambda + mu > 0)".to_string()).point =
                        Some(p.clone());
                }
                Some(_) => {
                    f.push(Severity::Info, "material", "c_p > c_s at every sample point".to_string());
                }
                None => {}
            }
        }
    }
    count
}
