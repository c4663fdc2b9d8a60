use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, BOUNDARY_TOL};

/// One side of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub fn as_str(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        }
    }

    /// Axis of the outward normal and its sign.
    pub fn normal_axis(self) -> (usize, f64) {
        match self {
            Edge::Left => (0, -1.0),
            Edge::Right => (0, 1.0),
            Edge::Bottom => (1, -1.0),
            Edge::Top => (1, 1.0),
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        let (a, s) = self.normal_axis();
        let mut n = [0.0; 2];
        n[a] = s;
        n
    }

    /// Axis along the edge.
    pub fn tangent_axis(self) -> usize {
        1 - self.normal_axis().0
    }

    /// Point of the edge of `[lo, hi]` at edge coordinate `s`.
    pub fn point(self, lo: [f64; 2], hi: [f64; 2], s: f64) -> [f64; 2] {
        match self {
            Edge::Left => [lo[0], s],
            Edge::Right => [hi[0], s],
            Edge::Bottom => [s, lo[1]],
            Edge::Top => [s, hi[1]],
        }
    }

    pub fn opposite(self) -> Edge {
        match self {
            Edge::Left => Edge::Right,
            Edge::Right => Edge::Left,
            Edge::Bottom => Edge::Top,
            Edge::Top => Edge::Bottom,
        }
    }
}

impl FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Edge::Left),
            "right" => Ok(Edge::Right),
            "bottom" => Ok(Edge::Bottom),
            "top" => Ok(Edge::Top),
            _ => Err(Error::Config(format!("unknown edge '{s}' (left, right, bottom, top)"))),
        }
    }
}

/// Ricker wavelet `(1 − 2a τ²) e^{−a τ²}`, `a = π² f0²`, `τ = t − delay`,
/// set to zero for `t < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ricker {
    pub f0: f64,
    pub delay: f64,
}

impl Ricker {
    /// Delay `1.5 / f0`.
    pub fn new(f0: f64) -> Self {
        Self { f0, delay: 1.5 / f0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let a = PI * PI * self.f0 * self.f0;
        let tau = t - self.delay;
        (1.0 - 2.0 * a * tau * tau) * (-a * tau * tau).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let a = PI * PI * self.f0 * self.f0;
        let tau = t - self.delay;
        -2.0 * a * tau * (3.0 - 2.0 * a * tau * tau) * (-a * tau * tau).exp()
    }

    /// Time after which the wavelet is below `1e-8` of its peak.
    pub fn duration(&self) -> f64 {
        2.0 * self.delay
    }
}

/// Dirichlet source on a patch of one box edge: a plateau of value 1 with
/// cos² tapers, times a Ricker pulse, along a fixed polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySource {
    pub edge: Edge,
    /// Patch centre and full width in the edge coordinate.
    pub center: f64,
    pub width: f64,
    /// Length of each cos² ramp; `width / 2` gives a pure bump.
    pub taper: f64,
    pub pulse: Ricker,
    pub polarization: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundarySource {
    pub fn new(edge: Edge, center: f64, width: f64, taper: f64, f0: f64, polarization: [f64; 2]) -> Self {
        Self { edge, center, width, taper, pulse: Ricker::new(f0), polarization, amplitude: 1.0 }
    }

    /// Narrow cos² bump of full width `width`.
    pub fn bump(edge: Edge, center: f64, width: f64, f0: f64, polarization: [f64; 2]) -> Self {
        Self::new(edge, center, width, 0.5 * width, f0, polarization)
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let (lo, hi) = domain.bounds::<2>()?;
        let a = self.edge.tangent_axis();
        if !(self.width > 0.0) || !(self.taper >= 0.0 && self.taper <= 0.5 * self.width) {
            return Err(Error::Config(format!(
                "source needs width > 0 and 0 <= taper <= width/2, got width {} taper {}",
                self.width, self.taper
            )));
        }
        if self.center - 0.5 * self.width < lo[a] || self.center + 0.5 * self.width > hi[a] {
            return Err(Error::Config(format!(
                "source patch [{}, {}] leaves the {} edge [{}, {}]",
                self.center - 0.5 * self.width,
                self.center + 0.5 * self.width,
                self.edge.as_str(),
                lo[a],
                hi[a]
            )));
        }
        if !(self.pulse.f0 > 0.0) || !(self.pulse.delay >= 0.0) {
            return Err(Error::Config("source needs f0 > 0 and a non-negative delay".into()));
        }
        if self.polarization[0].hypot(self.polarization[1]) == 0.0 {
            return Err(Error::Config("source polarization is zero".into()));
        }
        Ok(())
    }

    /// Spatial weight at edge coordinate `s`.
    pub fn profile(&self, s: f64) -> f64 {
        let d = (s - self.center).abs();
        let half = 0.5 * self.width;
        if d >= half {
            0.0
        } else if d <= half - self.taper {
            1.0
        } else {
            let q = (d - (half - self.taper)) / self.taper;
            (0.5 * PI * q).cos().powi(2)
        }
    }

    /// Displacement and velocity imposed at edge coordinate `s` and time `t`.
    pub fn displacement(&self, s: f64, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = self.amplitude * self.profile(s);
        if w == 0.0 {
            return ([0.0; 2], [0.0; 2]);
        }
        let (f, df) = (self.pulse.value(t), self.pulse.derivative(t));
        (
            [w * f * self.polarization[0], w * f * self.polarization[1]],
            [w * df * self.polarization[0], w * df * self.polarization[1]],
        )
    }

    /// Midpoint of the patch on the boundary.
    pub fn center_point(&self, domain: &Domain) -> Result<[f64; 2]> {
        let (lo, hi) = domain.bounds::<2>()?;
        Ok(self.edge.point(lo, hi, self.center))
    }
}

/// Receiver on a box edge at edge coordinate `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub edge: Edge,
    pub s: f64,
}

impl Receiver {
    pub fn new(edge: Edge, s: f64) -> Self {
        Self { edge, s }
    }

    /// The receiver at boundary point `x`, which must lie on an edge away
    /// from the corners.
    pub fn at_point(domain: &Domain, x: [f64; 2]) -> Result<Self> {
        let (lo, hi) = domain.bounds::<2>()?;
        let d = domain.signed_distance(&x)?;
        if d.abs() > BOUNDARY_TOL {
            return Err(Error::Config(format!("receiver {x:?} is {d:e} off the boundary")));
        }
        let edge = if (x[0] - lo[0]).abs() <= BOUNDARY_TOL {
            Edge::Left
        } else if (x[0] - hi[0]).abs() <= BOUNDARY_TOL {
            Edge::Right
        } else if (x[1] - lo[1]).abs() <= BOUNDARY_TOL {
            Edge::Bottom
        } else {
            Edge::Top
        };
        Ok(Self { edge, s: x[edge.tangent_axis()] })
    }

    /// `count` receivers evenly spaced on `[a, b]` along `edge`, ends included.
    pub fn along(edge: Edge, count: usize, a: f64, b: f64) -> Vec<Self> {
        match count {
            0 => Vec::new(),
            1 => vec![Self::new(edge, 0.5 * (a + b))],
            _ => (0..count)
                .map(|k| Self::new(edge, a + (b - a) * k as f64 / (count - 1) as f64))
                .collect(),
        }
    }

    pub fn point(&self, domain: &Domain) -> Result<[f64; 2]> {
        let (lo, hi) = domain.bounds::<2>()?;
        Ok(self.edge.point(lo, hi, self.s))
    }
}
