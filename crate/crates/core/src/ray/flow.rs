//! Hamiltonian flow of `H(x, ξ) = ½ c(x)² |ξ|²`.
//!
//! On the level set `H = ½` the flow parameter is metric arclength of
//! `c^-2 dx^2`, i.e. travel time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpeedField;
use crate::vecn;

/// Default cap on integration steps per ray.
pub const DEFAULT_MAX_STEPS: usize = 20_000_000;

/// Position, covector and accumulated travel time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<const D: usize> {
    #[serde(with = "arr")]
    pub x: [f64; D],
    #[serde(with = "arr")]
    pub xi: [f64; D],
    pub t: f64,
}

impl<const D: usize> PhasePoint<D> {
    /// Phase point on `H = ½` launched along the Euclidean direction `v`.
    pub fn launch(speed: &SpeedField, x: [f64; D], v: [f64; D]) -> Result<Self> {
        let c = speed.eval(&x)?;
        let xi = vecn::scale(&vecn::normalize(&v), 1.0 / c);
        Ok(Self { x, xi, t: 0.0 })
    }

    /// Euclidean unit tangent of the projected ray, `c²ξ / |c²ξ|`.
    pub fn direction(&self) -> [f64; D] {
        vecn::normalize(&self.xi)
    }
}

pub fn hamiltonian<const D: usize>(speed: &SpeedField, x: &[f64; D], xi: &[f64; D]) -> Result<f64> {
    let c = speed.eval(x)?;
    Ok(0.5 * c * c * vecn::dot(xi, xi))
}

type State<const D: usize> = ([f64; D], [f64; D]);

fn rhs<const D: usize>(speed: &SpeedField, s: &State<D>) -> Result<State<D>> {
    let (c, grad) = speed.eval_with_gradient(&s.0)?;
    let xi2 = vecn::dot(&s.1, &s.1);
    // ẋ = c² ξ,  ξ̇ = −½ ∇(c²) |ξ|² = −c ∇c |ξ|²
    Ok((vecn::scale(&s.1, c * c), vecn::scale(&grad, -c * xi2)))
}

/// One classical RK4 step of size `dt`.
pub(crate) fn rk4_step<const D: usize>(
    speed: &SpeedField,
    p: &PhasePoint<D>,
    dt: f64,
) -> Result<PhasePoint<D>> {
    let s0 = (p.x, p.xi);
    let k1 = rhs(speed, &s0)?;
    let s1 = (vecn::axpy(&s0.0, 0.5 * dt, &k1.0), vecn::axpy(&s0.1, 0.5 * dt, &k1.1));
    let k2 = rhs(speed, &s1)?;
    let s2 = (vecn::axpy(&s0.0, 0.5 * dt, &k2.0), vecn::axpy(&s0.1, 0.5 * dt, &k2.1));
    let k3 = rhs(speed, &s2)?;
    let s3 = (vecn::axpy(&s0.0, dt, &k3.0), vecn::axpy(&s0.1, dt, &k3.1));
    let k4 = rhs(speed, &s3)?;
    let comb = |a: &[f64; D], b: &[f64; D], c: &[f64; D], d: &[f64; D], y: &[f64; D]| -> [f64; D] {
        std::array::from_fn(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
    };
    Ok(PhasePoint {
        x: comb(&k1.0, &k2.0, &k3.0, &k4.0, &s0.0),
        xi: comb(&k1.1, &k2.1, &k3.1, &k4.1, &s0.1),
        t: p.t + dt,
    })
}

pub(crate) fn check_step(dt: f64, t_max: f64, max_steps: usize) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
    }
    let steps = (t_max / dt * (1.0 + 1e-12)).floor();
    if steps > max_steps as f64 {
        return Err(Error::Resource(format!(
            "{steps} steps needed for t_max = {t_max} at dt = {dt}, cap is {max_steps}"
        )));
    }
    Ok(steps as usize)
}

/// Integrates the bicharacteristic from `start` (which must lie on `H = ½`)
/// with fixed-step RK4, returning every step up to `t_max`.
pub fn integrate_bicharacteristic<const D: usize>(
    speed: &SpeedField,
    start: PhasePoint<D>,
    t_max: f64,
    dt: f64,
    max_steps: usize,
) -> Result<Vec<PhasePoint<D>>> {
    let steps = check_step(dt, t_max, max_steps)?;
    let h0 = hamiltonian(speed, &start.x, &start.xi)?;
    if (h0 - 0.5).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "start point has H = {h0}, expected 1/2 (normalize the covector)"
        )));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let t0 = start.t;
    out.push(start);
    let mut p = start;
    for k in 1..=steps {
        p = rk4_step(speed, &p, dt)?;
        p.t = t0 + k as f64 * dt;
        out.push(p);
    }
    Ok(out)
}

/// Largest relative deviation of `H` from ½ along a trajectory.
pub fn max_hamiltonian_drift<const D: usize>(speed: &SpeedField, path: &[PhasePoint<D>]) -> Result<f64> {
    path.iter().try_fold(0.0f64, |acc, p| {
        Ok(acc.max((hamiltonian(speed, &p.x, &p.xi)? - 0.5).abs() / 0.5))
    })
}

pub(crate) mod arr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(a: &[f64; D], s: S) -> Result<S::Ok, S::Error> {
        a.as_slice().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<[f64; D], De::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"a point"))
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScalarField;

    #[test]
    fn hamiltonian_values() {
        assert_eq!(hamiltonian(&ScalarField::constant(1.0), &[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(hamiltonian(&ScalarField::constant(2.0), &[0.0, 0.0], &[0.5, 0.0]).unwrap(), 0.5);
        let c = ScalarField::radial_affine(2.0, -1.0);
        assert!((hamiltonian(&c, &[0.5, 0.0], &[1.0, 0.0]).unwrap() - 1.125).abs() < 1e-15);
    }

    #[test]
    fn constant_speed_rays_are_straight() {
        let c = ScalarField::constant(1.0);
        let start = PhasePoint { x: [-1.0, 0.0], xi: [1.0, 0.0], t: 0.0 };
        let path = integrate_bicharacteristic(&c, start, 1.5, 0.01, DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(path.len(), 151);
        for p in &path {
            assert!((p.x[0] - (-1.0 + p.t)).abs() < 1e-13);
            assert_eq!(p.x[1], 0.0);
        }
        assert!((path.last().unwrap().t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn radial_entry_stays_on_diameter() {
        let c = ScalarField::radial_affine(2.0, -1.0);
        let start = PhasePoint::launch(&c, [-1.0, 0.0], [1.0, 0.0]).unwrap();
        let path = integrate_bicharacteristic(&c, start, 0.9, 1e-3, DEFAULT_MAX_STEPS).unwrap();
        assert!(path.iter().all(|p| p.x[1].abs() < 1e-10));
    }

    #[test]
    fn linear_gradient_rays_are_circular_arcs() {
        // c = 1 + z: rays are arcs of radius 1/(b p) centred on z = -1, p = cos θ / c(0).
        let c = ScalarField::depth_affine(1.0, 1.0);
        let theta: f64 = 0.6;
        let start = PhasePoint::launch(&c, [0.0, 0.0], [theta.cos(), theta.sin()]).unwrap();
        let radius = 1.0 / theta.cos();
        let centre = [theta.tan(), -1.0];
        let path = integrate_bicharacteristic(&c, start, 1.2, 1e-3, DEFAULT_MAX_STEPS).unwrap();
        for p in &path {
            assert!((vecn::dist(&p.x, &centre) - radius).abs() < 1e-9);
        }
        // Apex of the arc: the sample closest to x = tan θ.
        let apex = path
            .iter()
            .min_by(|a, b| (a.x[0] - centre[0]).abs().partial_cmp(&(b.x[0] - centre[0]).abs()).unwrap())
            .unwrap();
        let z_analytic = (radius * radius - (apex.x[0] - centre[0]).powi(2)).sqrt() - 1.0;
        assert!((apex.x[1] - z_analytic).abs() < 1e-6);
        assert!((apex.x[1] - (radius - 1.0)).abs() < 1e-3);
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        let c = ScalarField::depth_affine(1.0, 1.0);
        let start = PhasePoint::launch(&c, [0.0, 0.0], [0.8, 0.6]).unwrap();
        let end = |dt: f64| *integrate_bicharacteristic(&c, start, 1.0, dt, DEFAULT_MAX_STEPS).unwrap().last().unwrap();
        let (a, b, d) = (end(0.1), end(0.05), end(0.025));
        let ratio = vecn::dist(&a.x, &b.x) / vecn::dist(&b.x, &d.x);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn hamiltonian_is_conserved() {
        let c = ScalarField::radial_affine(2.0, -1.0);
        let start = PhasePoint::launch(&c, [-0.9, 0.0], [0.7, 0.5]).unwrap();
        let path = integrate_bicharacteristic(&c, start, 1.0, 1e-3, DEFAULT_MAX_STEPS).unwrap();
        assert!(max_hamiltonian_drift(&c, &path).unwrap() < 1e-8);
    }

    #[test]
    fn unnormalized_start_is_rejected() {
        let c = ScalarField::constant(1.0);
        let start = PhasePoint { x: [0.0, 0.0], xi: [2.0, 0.0], t: 0.0 };
        assert!(matches!(
            integrate_bicharacteristic(&c, start, 1.0, 0.1, 100),
            Err(Error::Precondition(_))
        ));
        let ok = PhasePoint { x: [0.0, 0.0], xi: [1.0, 0.0], t: 0.0 };
        assert!(matches!(integrate_bicharacteristic(&c, ok, 1.0, 1e-3, 100), Err(Error::Resource(_))));
    }
}
