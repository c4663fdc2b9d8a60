use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::domain::Grid2D;
use crate::model::interp::{keys_weights, MonotoneCubic, PiecewiseLinear};
use crate::model::material::{ElasticMaterial, Mode};
use crate::vecn;

/// Width of the band outside a table's node range where it is still
/// evaluated (by linear continuation).
pub const COLLAR: f64 = 0.1;

/// A function of one variable (radius or depth).
#[derive(Debug, Clone, PartialEq)]
pub enum Profile1D {
    /// a + b s
    Affine { a: f64, b: f64 },
    /// 1 / (a + b s)
    Reciprocal { a: f64, b: f64 },
    /// Monotone C¹ cubic through tabulated nodes.
    Table(MonotoneCubic),
    /// Piecewise-linear through tabulated nodes (kinks allowed).
    Linear(PiecewiseLinear),
}

impl Profile1D {
    pub fn table(nodes: &[[f64; 2]]) -> Result<Self> {
        let (xs, ys) = nodes.iter().map(|n| (n[0], n[1])).unzip();
        Ok(Profile1D::Table(MonotoneCubic::new(xs, ys)?))
    }

    pub fn piecewise_linear(nodes: &[[f64; 2]]) -> Result<Self> {
        let (xs, ys) = nodes.iter().map(|n| (n[0], n[1])).unzip();
        Ok(Profile1D::Linear(PiecewiseLinear::new(xs, ys)?))
    }

    fn range(&self) -> Option<(f64, f64)> {
        match self {
            Profile1D::Table(t) => Some(t.range()),
            Profile1D::Linear(t) => Some(t.range()),
            _ => None,
        }
    }

    /// Value and derivative; `None` outside the table range plus collar.
    pub fn eval(&self, s: f64) -> Option<(f64, f64)> {
        if let Some((lo, hi)) = self.range() {
            if s < lo - COLLAR || s > hi + COLLAR {
                return None;
            }
        }
        Some(match self {
            Profile1D::Affine { a, b } => (a + b * s, *b),
            Profile1D::Reciprocal { a, b } => {
                let den = a + b * s;
                (1.0 / den, -b / (den * den))
            }
            Profile1D::Table(t) => t.eval(s),
            Profile1D::Linear(t) => t.eval(s),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridInterp {
    /// Keys cubic convolution: C¹, reproduces nodal values.
    #[default]
    Bicubic,
    Bilinear,
}

/// Node values on a [`Grid2D`], row-major (`values[j * nx + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub interp: GridInterp,
}

impl GridField {
    pub fn new(grid: Grid2D, values: Vec<f64>, interp: GridInterp) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "grid field has {} values for a {} x {} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Model(format!(
                "grid value at node ({}, {}) is not finite",
                k % grid.nx,
                k / grid.nx
            )));
        }
        Ok(Self { grid, values, interp })
    }

    /// Samples `f` at every node.
    pub fn sample(grid: Grid2D, interp: GridInterp, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.node(i, j)));
            }
        }
        Self::new(grid, values, interp)
    }

    fn node_value(&self, i: isize, j: isize) -> f64 {
        // Ghost nodes by linear extrapolation (Keys' boundary rule for cubic convolution).
        let (nx, ny) = (self.grid.nx as isize, self.grid.ny as isize);
        let at = |i: isize, j: isize| self.values[(j * nx + i) as usize];
        let col = |j: isize| -> f64 {
            if i < 0 {
                2.0 * at(0, j) - at(1, j)
            } else if i >= nx {
                2.0 * at(nx - 1, j) - at(nx - 2, j)
            } else {
                at(i, j)
            }
        };
        if j < 0 {
            2.0 * col(0) - col(1)
        } else if j >= ny {
            2.0 * col(ny - 1) - col(ny - 2)
        } else {
            col(j)
        }
    }

    /// Value and gradient at `x`, with the enclosing cell index.
    pub fn eval(&self, x: &[f64; 2]) -> Option<(f64, [f64; 2], (usize, usize))> {
        let g = &self.grid;
        let fx = (x[0] - g.origin[0]) / g.h;
        let fy = (x[1] - g.origin[1]) / g.h;
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > (g.nx - 1) as f64 + eps || fy > (g.ny - 1) as f64 + eps {
            return None;
        }
        let i = (fx.floor() as isize).clamp(0, g.nx as isize - 2);
        let j = (fy.floor() as isize).clamp(0, g.ny as isize - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let cell = (i as usize, j as usize);
        match self.interp {
            GridInterp::Bilinear => {
                let v00 = self.node_value(i, j);
                let v10 = self.node_value(i + 1, j);
                let v01 = self.node_value(i, j + 1);
                let v11 = self.node_value(i + 1, j + 1);
                let v = v00 * (1.0 - tx) * (1.0 - ty)
                    + v10 * tx * (1.0 - ty)
                    + v01 * (1.0 - tx) * ty
                    + v11 * tx * ty;
                let gx = ((v10 - v00) * (1.0 - ty) + (v11 - v01) * ty) / g.h;
                let gy = ((v01 - v00) * (1.0 - tx) + (v11 - v10) * tx) / g.h;
                Some((v, [gx, gy], cell))
            }
            GridInterp::Bicubic => {
                let (wx, dwx) = keys_weights(tx);
                let (wy, dwy) = keys_weights(ty);
                let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for (b, (wyb, dwyb)) in wy.iter().zip(&dwy).enumerate() {
                    for (a, (wxa, dwxa)) in wx.iter().zip(&dwx).enumerate() {
                        let f = self.node_value(i + a as isize - 1, j + b as isize - 1);
                        v += wxa * wyb * f;
                        gx += dwxa * wyb * f;
                        gy += wxa * dwyb * f;
                    }
                }
                Some((v, [gx / g.h, gy / g.h], cell))
            }
        }
    }
}

/// A positive scalar field: a wave speed, or a Lamé modulus / density.
///
/// Speeds define the conformal metric `c^-2 dx^2`: a vector `v` at `x` is
/// unit for that metric iff `|v| = c(x)`, and the metric length of a curve is
/// `∫ |γ'| / c(γ) dt`.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `f(|x|)`
    Radial(Profile1D),
    /// `f(x_last)`, the last coordinate being depth.
    Depth(Profile1D),
    /// `a + b·x`
    Linear { a: f64, b: Vec<f64> },
    /// Tabulated on a planar grid.
    Grid(GridField),
    /// P or S speed derived from an elastic material.
    Material { material: Arc<ElasticMaterial>, mode: Mode },
    /// `factor * base`
    Scaled { base: Arc<ScalarField>, factor: f64 },
}

/// Wave speed `c(x)`; see [`ScalarField`].
pub type SpeedField = ScalarField;

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        ScalarField::Constant(c)
    }

    /// `a + b r` as a function of the distance to the origin.
    pub fn radial_affine(a: f64, b: f64) -> Self {
        ScalarField::Radial(Profile1D::Affine { a, b })
    }

    /// `a + b x_last`.
    pub fn depth_affine(a: f64, b: f64) -> Self {
        ScalarField::Depth(Profile1D::Affine { a, b })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ScalarField::Scaled {
            base: Arc::new(self.clone()),
            factor,
        }
    }

    /// Value and gradient at `x` without positivity check.
    fn raw<const D: usize>(&self, x: &[f64; D]) -> Result<(f64, [f64; D])> {
        match self {
            ScalarField::Constant(c) => Ok((*c, [0.0; D])),
            ScalarField::Radial(p) => {
                let r = vecn::norm(x);
                let (v, dv) = p.eval(r).ok_or_else(|| Error::domain(x, "radius outside profile"))?;
                let grad = if r > 0.0 {
                    vecn::scale(x, dv / r)
                } else {
                    [0.0; D]
                };
                Ok((v, grad))
            }
            ScalarField::Depth(p) => {
                let z = x[D - 1];
                let (v, dv) = p.eval(z).ok_or_else(|| Error::domain(x, "depth outside profile"))?;
                let mut grad = [0.0; D];
                grad[D - 1] = dv;
                Ok((v, grad))
            }
            ScalarField::Linear { a, b } => {
                if b.len() != D {
                    return Err(Error::Shape(format!(
                        "linear field has a {}-vector gradient, queried in {D}D",
                        b.len()
                    )));
                }
                let grad: [f64; D] = std::array::from_fn(|i| b[i]);
                Ok((a + vecn::dot(&grad, x), grad))
            }
            ScalarField::Grid(gf) => {
                if D != 2 {
                    return Err(Error::Unsupported("grid-sampled fields are planar".into()));
                }
                let p = [x[0], x[1]];
                let (v, g, _) = gf.eval(&p).ok_or_else(|| Error::domain(x, "outside grid"))?;
                let mut grad = [0.0; D];
                grad[0] = g[0];
                grad[1] = g[1];
                Ok((v, grad))
            }
            ScalarField::Material { material, mode } => material.speed_and_gradient(x, *mode),
            ScalarField::Scaled { base, factor } => {
                let (v, g) = base.raw(x)?;
                Ok((factor * v, vecn::scale(&g, *factor)))
            }
        }
    }

    /// Value and gradient; the value must be positive.
    pub fn eval_with_gradient<const D: usize>(&self, x: &[f64; D]) -> Result<(f64, [f64; D])> {
        let (v, g) = self.raw(x)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(self.non_positive(x, v));
        }
        Ok((v, g))
    }

    pub fn eval<const D: usize>(&self, x: &[f64; D]) -> Result<f64> {
        self.eval_with_gradient(x).map(|(v, _)| v)
    }

    pub fn gradient<const D: usize>(&self, x: &[f64; D]) -> Result<[f64; D]> {
        self.eval_with_gradient(x).map(|(_, g)| g)
    }

    fn non_positive<const D: usize>(&self, x: &[f64; D], v: f64) -> Error {
        match self {
            ScalarField::Grid(gf) => {
                let cell = gf.eval(&[x[0], x[1]]).map(|(_, _, c)| c).unwrap_or((0, 0));
                Error::Model(format!(
                    "non-positive interpolated value {v:e} at {x:?} in the cell with lower node ({}, {})",
                    cell.0, cell.1
                ))
            }
            _ => Error::Model(format!("non-positive value {v:e} at {x:?}")),
        }
    }

    /// True when the gradient is known in closed form rather than from a
    /// tabulated interpolant.
    pub fn has_analytic_gradient(&self) -> bool {
        match self {
            ScalarField::Material { material, .. } => {
                material.lambda.has_analytic_gradient()
                    && material.mu.has_analytic_gradient()
                    && material.rho.has_analytic_gradient()
            }
            ScalarField::Scaled { base, .. } => base.has_analytic_gradient(),
            ScalarField::Grid(_) => false,
            _ => true,
        }
    }

    /// True if the field depends only on `|x|`.
    pub fn is_radial(&self) -> bool {
        match self {
            ScalarField::Constant(_) | ScalarField::Radial(_) => true,
            ScalarField::Scaled { base, .. } => base.is_radial(),
            ScalarField::Material { material, .. } => {
                material.lambda.is_radial() && material.mu.is_radial() && material.rho.is_radial()
            }
            _ => false,
        }
    }

    /// True if the field depends only on the last coordinate.
    pub fn is_depth_only(&self) -> bool {
        match self {
            ScalarField::Constant(_) | ScalarField::Depth(_) => true,
            ScalarField::Linear { b, .. } => b[..b.len().saturating_sub(1)].iter().all(|v| *v == 0.0),
            ScalarField::Scaled { base, .. } => base.is_depth_only(),
            ScalarField::Material { material, .. } => {
                material.lambda.is_depth_only()
                    && material.mu.is_depth_only()
                    && material.rho.is_depth_only()
            }
            ScalarField::Grid(_) | ScalarField::Radial(_) => false,
        }
    }
}
