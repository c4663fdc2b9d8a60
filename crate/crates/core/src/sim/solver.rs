use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, ElasticMaterial, Grid2D};
use crate::sim::field::{NodalMaterial, VectorField};
use crate::sim::operator::{apply_into, stress};
use crate::sim::source::{BoundarySource, Edge, Receiver};

/// Largest accepted `dt · max c_p / h`.
pub const MAX_CFL: f64 = 0.5;
/// Smallest accepted number of grid spacings per shear wavelength at `f0`.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 12.0;

/// Displacement, velocity and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefieldState {
    pub u: VectorField,
    pub v: VectorField,
    pub t: f64,
}

impl WavefieldState {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { u: VectorField::zeros(grid), v: VectorField::zeros(grid), t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub h: f64,
    /// `dt = courant · h / max c_p` unless `dt` is given.
    pub courant: f64,
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
}

impl SimConfig {
    pub fn new(h: f64, t_end: f64) -> Self {
        Self { h, courant: 0.4, t_end, dt: None }
    }

    pub fn time_step(&self, mat: &NodalMaterial) -> Result<f64> {
        let dt = self.dt.unwrap_or(self.courant * mat.grid.h / mat.max_cp());
        check_cfl(mat, dt)?;
        Ok(dt)
    }
}

fn check_cfl(mat: &NodalMaterial, dt: f64) -> Result<()> {
    let cfl = dt * mat.max_cp() / mat.grid.h;
    if !(dt > 0.0) || cfl > MAX_CFL * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "time step {dt} gives CFL number {cfl:.4}, limit is {MAX_CFL}"
        )));
    }
    Ok(())
}

/// Boundary nodes of `edge` with their edge coordinate.
fn edge_nodes(grid: &Grid2D, edge: Edge) -> Vec<(usize, f64)> {
    let (nx, ny) = (grid.nx, grid.ny);
    let pick = |i: usize, j: usize| {
        let x = grid.node(i, j);
        (grid.index(i, j), x[edge.tangent_axis()])
    };
    match edge {
        Edge::Left => (0..ny).map(|j| pick(0, j)).collect(),
        Edge::Right => (0..ny).map(|j| pick(nx - 1, j)).collect(),
        Edge::Bottom => (0..nx).map(|i| pick(i, 0)).collect(),
        Edge::Top => (0..nx).map(|i| pick(i, ny - 1)).collect(),
    }
}

fn impose_boundary(state: &mut WavefieldState, nodes: &[(usize, f64)], source: Option<&BoundarySource>) {
    let g = state.u.grid;
    for e in [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top] {
        for (k, _) in edge_nodes(&g, e) {
            state.u.x[k] = 0.0;
            state.u.y[k] = 0.0;
            state.v.x[k] = 0.0;
            state.v.y[k] = 0.0;
        }
    }
    if let Some(src) = source {
        for &(k, s) in nodes {
            let (u, v) = src.displacement(s, state.t);
            state.u.x[k] = u[0];
            state.u.y[k] = u[1];
            state.v.x[k] = v[0];
            state.v.y[k] = v[1];
        }
    }
}

/// Velocity-Verlet update of the interior, with `acc` the acceleration of
/// the incoming state; on return `acc` belongs to the new state.
fn advance(
    state: &mut WavefieldState,
    acc: &mut VectorField,
    mat: &NodalMaterial,
    nodes: &[(usize, f64)],
    source: Option<&BoundarySource>,
    dt: f64,
) -> Result<()> {
    let half = 0.5 * dt;
    let n = state.u.x.len();
    for k in 0..n {
        state.v.x[k] += half * acc.x[k];
        state.v.y[k] += half * acc.y[k];
        state.u.x[k] += dt * state.v.x[k];
        state.u.y[k] += dt * state.v.y[k];
    }
    state.t += dt;
    impose_boundary(state, nodes, source);
    apply_into(mat, &state.u, acc)?;
    for k in 0..n {
        state.v.x[k] += half * acc.x[k];
        state.v.y[k] += half * acc.y[k];
    }
    Ok(())
}

/// One leapfrog step from `state`. Edges other than the source edge are
/// clamped to zero.
pub fn step(
    state: &WavefieldState,
    mat: &NodalMaterial,
    source: Option<&BoundarySource>,
    dt: f64,
) -> Result<WavefieldState> {
    check_cfl(mat, dt)?;
    state.u.check_grid(&mat.grid)?;
    state.v.check_grid(&mat.grid)?;
    let nodes = source.map(|s| edge_nodes(&mat.grid, s.edge)).unwrap_or_default();
    let mut next = state.clone();
    let mut acc = VectorField::zeros(mat.grid);
    apply_into(mat, &next.u, &mut acc)?;
    advance(&mut next, &mut acc, mat, &nodes, source, dt)?;
    Ok(next)
}

/// Discrete energy `½ Σ w ρ |v|² h² − ½ Σ u · (ρ E u) h²`, trapezoid weights
/// `w` for the kinetic part and interior nodes for the potential part.
pub fn energy(state: &WavefieldState, mat: &NodalMaterial) -> Result<f64> {
    let mut acc = VectorField::zeros(mat.grid);
    apply_into(mat, &state.u, &mut acc)?;
    Ok(energy_with(state, mat, &acc))
}

fn energy_with(state: &WavefieldState, mat: &NodalMaterial, acc: &VectorField) -> f64 {
    let g = mat.grid;
    let mut kin = 0.0;
    let mut pot = 0.0;
    for j in 0..g.ny {
        let wy = if j == 0 || j == g.ny - 1 { 0.5 } else { 1.0 };
        for i in 0..g.nx {
            let wx = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
            let k = g.index(i, j);
            let rho = mat.rho[k];
            kin += wx * wy * rho * (state.v.x[k].powi(2) + state.v.y[k].powi(2));
            pot -= rho * (state.u.x[k] * acc.x[k] + state.u.y[k] * acc.y[k]);
        }
    }
    0.5 * (kin + pot) * g.h * g.h
}

/// Traction `σ(u)·ν` at a boundary node of `edge`, with one-sided
/// second-order normal derivatives and centred tangential ones.
fn node_traction(u: &VectorField, mat: &NodalMaterial, edge: Edge, k: usize) -> [f64; 2] {
    let g = mat.grid;
    let (axis, sign) = edge.normal_axis();
    let stride = |a: usize| if a == 0 { 1isize } else { g.nx as isize };
    let at = |f: &[f64], off: isize| f[(k as isize + off) as usize];
    let sn = stride(axis);
    let st = stride(1 - axis);
    let inward = -(sign as isize) * sn;
    let dn = |f: &[f64]| -sign * (-3.0 * at(f, 0) + 4.0 * at(f, inward) - at(f, 2 * inward)) / (2.0 * g.h);
    let dt = |f: &[f64]| (at(f, st) - at(f, -st)) / (2.0 * g.h);
    let mut grad = [[0.0; 2]; 2];
    for (c, f) in [&u.x, &u.y].into_iter().enumerate() {
        grad[c][axis] = dn(f);
        grad[c][1 - axis] = dt(f);
    }
    let s = stress(mat.lambda[k], mat.mu[k], grad);
    let n = edge.outward_normal();
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

/// Bracketing edge nodes and interpolation weight of a receiver.
fn receiver_stencil(grid: &Grid2D, r: &Receiver) -> Result<(usize, usize, f64)> {
    let a = r.edge.tangent_axis();
    let n = if a == 0 { grid.nx } else { grid.ny };
    let q = (r.s - grid.origin[a]) / grid.h;
    let i0 = (q.floor().max(0.0) as usize).min(n - 2);
    let frac = q - i0 as f64;
    let i1 = if frac > 1e-9 { i0 + 1 } else { i0 };
    if i0 < 1 || i1 > n - 2 {
        return Err(Error::Config(format!(
            "receiver at {} = {} on the {} edge is too close to a corner",
            if a == 0 { "x" } else { "y" },
            r.s,
            r.edge.as_str()
        )));
    }
    let idx = |t: usize| -> usize {
        let (axis, sign) = r.edge.normal_axis();
        let fixed = if sign > 0.0 { if axis == 0 { grid.nx - 1 } else { grid.ny - 1 } } else { 0 };
        if axis == 0 {
            grid.index(fixed, t)
        } else {
            grid.index(t, fixed)
        }
    };
    Ok((idx(i0), idx(i1), frac.clamp(0.0, 1.0)))
}

pub fn traction_at(u: &VectorField, mat: &NodalMaterial, r: &Receiver) -> Result<[f64; 2]> {
    u.check_grid(&mat.grid)?;
    let (k0, k1, w) = receiver_stencil(&mat.grid, r)?;
    let a = node_traction(u, mat, r.edge, k0);
    let b = node_traction(u, mat, r.edge, k1);
    Ok([(1.0 - w) * a[0] + w * b[0], (1.0 - w) * a[1] + w * b[1]])
}

/// A time-stepping run on a box.
#[derive(Debug, Clone)]
pub struct Simulation {
    mat: NodalMaterial,
    source: Option<BoundarySource>,
    nodes: Vec<(usize, f64)>,
    state: WavefieldState,
    acc: VectorField,
    dt: f64,
    steps: usize,
}

impl Simulation {
    pub fn new(mat: NodalMaterial, source: Option<BoundarySource>, dt: f64) -> Result<Self> {
        check_cfl(&mat, dt)?;
        let grid = mat.grid;
        let nodes = source.map(|s| edge_nodes(&grid, s.edge)).unwrap_or_default();
        let mut state = WavefieldState::zeros(grid);
        impose_boundary(&mut state, &nodes, source.as_ref());
        let mut acc = VectorField::zeros(grid);
        apply_into(&mat, &state.u, &mut acc)?;
        Ok(Self { mat, source, nodes, state, acc, dt, steps: 0 })
    }

    /// Replaces the current state (edges are re-imposed).
    pub fn with_state(mut self, mut state: WavefieldState) -> Result<Self> {
        state.u.check_grid(&self.mat.grid)?;
        state.v.check_grid(&self.mat.grid)?;
        impose_boundary(&mut state, &self.nodes, self.source.as_ref());
        apply_into(&self.mat, &state.u, &mut self.acc)?;
        self.state = state;
        Ok(self)
    }

    pub fn step(&mut self) -> Result<()> {
        advance(&mut self.state, &mut self.acc, &self.mat, &self.nodes, self.source.as_ref(), self.dt)?;
        self.steps += 1;
        // restore exact time to avoid drift from repeated addition
        self.state.t = self.steps as f64 * self.dt;
        Ok(())
    }

    pub fn state(&self) -> &WavefieldState {
        &self.state
    }

    pub fn material(&self) -> &NodalMaterial {
        &self.mat
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn energy(&self) -> f64 {
        energy_with(&self.state, &self.mat, &self.acc)
    }

    pub fn traction(&self, r: &Receiver) -> Result<[f64; 2]> {
        traction_at(&self.state.u, &self.mat, r)
    }
}

/// Neumann data recorded at one receiver, sampled every `dt` from `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionTrace {
    pub receiver: Receiver,
    pub point: [f64; 2],
    pub dt: f64,
    pub samples: Vec<[f64; 2]>,
}

impl TractionTrace {
    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[c]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s[0].abs()).max(s[1].abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Nu_x,Nu_y\n");
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(out, "{:.12e},{:.12e},{:.12e}", k as f64 * self.dt, s[0], s[1]).expect("string write");
        }
        out
    }

    pub fn from_csv(text: &str, receiver: Receiver, point: [f64; 2]) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().trim();
        if header != "t,Nu_x,Nu_y" {
            return Err(Error::Config(format!("unexpected trace header '{header}'")));
        }
        let mut ts = Vec::new();
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("trace line {}: bad number", n + 2)))?;
            if f.len() != 3 {
                return Err(Error::Config(format!("trace line {}: expected 3 fields", n + 2)));
            }
            ts.push(f[0]);
            samples.push([f[1], f[2]]);
        }
        if ts.len() < 2 {
            return Err(Error::Config("trace needs at least two samples".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        Ok(Self { receiver, point, dt, samples })
    }
}

/// Traces and run metadata of a Dirichlet-to-Neumann simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnRun {
    pub traces: Vec<TractionTrace>,
    pub grid: Grid2D,
    pub dt: f64,
    pub steps: usize,
    pub cfl: f64,
    pub max_cp: f64,
    pub min_cs: f64,
    pub source: BoundarySource,
}

/// Drives the box with `source` and records `σ(u)·ν` at every receiver
/// for `t ∈ [0, t_end]`.
pub fn simulate_dn(
    material: &ElasticMaterial,
    domain: &Domain,
    source: &BoundarySource,
    receivers: &[Receiver],
    cfg: &SimConfig,
) -> Result<DnRun> {
    let grid = Grid2D::covering(domain, cfg.h)?;
    let mat = NodalMaterial::sample(material, grid)?;
    simulate_dn_on(mat, domain, source, receivers, cfg)
}

pub(crate) fn simulate_dn_on(
    mat: NodalMaterial,
    domain: &Domain,
    source: &BoundarySource,
    receivers: &[Receiver],
    cfg: &SimConfig,
) -> Result<DnRun> {
    source.validate(domain)?;
    if !(cfg.t_end > 0.0) {
        return Err(Error::Config(format!("simulation length must be positive, got {}", cfg.t_end)));
    }
    let grid = mat.grid;
    let (max_cp, min_cs) = (mat.max_cp(), mat.min_cs());
    let ppw = min_cs / source.pulse.f0 / grid.h;
    if ppw < MIN_POINTS_PER_WAVELENGTH {
        return Err(Error::Config(format!(
            "f0 = {} resolves the shear wavelength with {ppw:.1} grid spacings, need {MIN_POINTS_PER_WAVELENGTH}",
            source.pulse.f0
        )));
    }
    let dt = cfg.time_step(&mat)?;
    let points = receivers
        .iter()
        .map(|r| {
            receiver_stencil(&grid, r)?;
            r.point(domain)
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = (cfg.t_end / dt * (1.0 + 1e-12)).floor() as usize;
    let mut sim = Simulation::new(mat, Some(*source), dt)?;
    let mut samples: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(steps + 1); receivers.len()];
    let record = |sim: &Simulation, samples: &mut Vec<Vec<[f64; 2]>>| -> Result<()> {
        for (r, s) in receivers.iter().zip(samples.iter_mut()) {
            s.push(sim.traction(r)?);
        }
        Ok(())
    };
    record(&sim, &mut samples)?;
    for _ in 0..steps {
        sim.step()?;
        record(&sim, &mut samples)?;
    }
    if !sim.state().is_finite() {
        return Err(Error::Numerical("wavefield became non-finite".into()));
    }
    Ok(DnRun {
        traces: receivers
            .iter()
            .zip(points)
            .zip(samples)
            .map(|((r, p), s)| TractionTrace { receiver: *r, point: p, dt, samples: s })
            .collect(),
        grid,
        dt,
        steps,
        cfl: dt * max_cp / grid.h,
        max_cp,
        min_cs,
        source: *source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid2D {
        Grid2D::new([0.0, 0.0], 1.0 / (n - 1) as f64, n, n).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = unit_grid(21);
        let mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
        let s = step(&WavefieldState::zeros(g), &mat, None, 0.01).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.v.max_abs(), 0.0);
        assert!((s.t - 0.01).abs() < 1e-15);
        assert_eq!(energy(&s, &mat).unwrap(), 0.0);
    }

    #[test]
    fn cfl_violation_is_a_config_error() {
        let g = unit_grid(21);
        let mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
        let dt = 0.6 * g.h / 3f64.sqrt();
        assert!(matches!(step(&WavefieldState::zeros(g), &mat, None, dt), Err(Error::Config(_))));
        assert!(matches!(Simulation::new(mat, None, dt), Err(Error::Config(_))));
    }

    #[test]
    fn rigid_translation_is_kinetic_only() {
        let g = Grid2D::new([0.0, 0.0], 0.1, 11, 21).unwrap();
        let mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 2.0);
        let st = WavefieldState {
            u: VectorField::from_fn(g, |_| [0.3, 0.1]),
            v: VectorField::from_fn(g, |_| [1.0, 2.0]),
            t: 0.0,
        };
        let e = energy(&st, &mat).unwrap();
        assert!((e - 0.5 * 2.0 * 5.0 * 2.0).abs() < 1e-12, "{e}");
    }

    fn pulse_drift(n: usize, sigma: f64, courant: f64, steps: usize) -> f64 {
        let g = unit_grid(n);
        let mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
        let dt = courant * g.h / 3f64.sqrt();
        let u0 = VectorField::from_fn(g, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            let b = (-r2 / (2.0 * sigma * sigma)).exp();
            [b, -0.5 * b]
        });
        let mut sim = Simulation::new(mat, None, dt).unwrap().with_state(WavefieldState {
            u: u0,
            v: VectorField::zeros(g),
            t: 0.0,
        })
        .unwrap();
        let e0 = sim.energy();
        assert!(e0 > 0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..steps {
            sim.step().unwrap();
            worst = worst.max((sim.energy() - e0).abs() / e0);
        }
        worst
    }

    #[test]
    fn interior_pulse_conserves_energy() {
        // the P front covers 100 h in 1000 steps and stays clear of the walls
        let n = 281;
        let worst = pulse_drift(n, 6.0 / (n - 1) as f64, 0.1, 1000);
        assert!(worst < 5e-3, "energy drift {worst}");
    }

    #[test]
    fn closed_box_conserves_energy() {
        let worst = pulse_drift(101, 0.05, 0.5, 1000);
        assert!(worst < 5e-3, "energy drift {worst}");
    }

    #[test]
    fn zero_source_amplitude_gives_zero_traces() {
        let dom = Domain::unit_box::<2>();
        let mut src = BoundarySource::new(Edge::Left, 0.5, 0.6, 0.1, 5.0, [1.0, 0.0]);
        src.amplitude = 0.0;
        let run = simulate_dn(
            &ElasticMaterial::homogeneous(1.0, 1.0, 1.0),
            &dom,
            &src,
            &[Receiver::new(Edge::Right, 0.5)],
            &SimConfig::new(1.0 / 80.0, 0.2),
        )
        .unwrap();
        assert_eq!(run.traces[0].max_abs(), 0.0);
        assert_eq!(run.traces[0].samples.len(), run.steps + 1);
    }

    #[test]
    fn corner_receivers_and_off_boundary_points_are_refused() {
        let dom = Domain::unit_box::<2>();
        let src = BoundarySource::new(Edge::Left, 0.5, 0.6, 0.1, 5.0, [1.0, 0.0]);
        let r = simulate_dn(
            &ElasticMaterial::homogeneous(1.0, 1.0, 1.0),
            &dom,
            &src,
            &[Receiver::new(Edge::Right, 0.0)],
            &SimConfig::new(1.0 / 80.0, 0.1),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn traction_of_a_linear_field_is_exact() {
        let g = unit_grid(41);
        let mut mat = NodalMaterial::homogeneous(g, 1.5, 0.5, 1.0);
        mat.mu.iter_mut().for_each(|m| *m = 0.5);
        let grad = [[0.2, -0.4], [0.7, 0.1]];
        let u = VectorField::from_fn(g, |x| {
            [grad[0][0] * x[0] + grad[0][1] * x[1], grad[1][0] * x[0] + grad[1][1] * x[1]]
        });
        let s = stress(1.5, 0.5, grad);
        for (edge, n) in [(Edge::Right, [1.0, 0.0]), (Edge::Left, [-1.0, 0.0]), (Edge::Top, [0.0, 1.0]), (Edge::Bottom, [0.0, -1.0])] {
            let t = traction_at(&u, &mat, &Receiver::new(edge, 0.33)).unwrap();
            let expect = [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]];
            assert!((t[0] - expect[0]).abs() < 1e-12 && (t[1] - expect[1]).abs() < 1e-12, "{edge:?}");
        }
    }

    #[test]
    fn trace_csv_round_trip() {
        let tr = TractionTrace {
            receiver: Receiver::new(Edge::Right, 0.5),
            point: [1.0, 0.5],
            dt: 0.01,
            samples: vec![[0.0, 1.0], [2.0, -3.5], [1e-9, 4.0]],
        };
        let back = TractionTrace::from_csv(&tr.to_csv(), tr.receiver, tr.point).unwrap();
        assert_eq!(back.samples, tr.samples);
        assert!((back.dt - 0.01).abs() < 1e-15);
    }
}
