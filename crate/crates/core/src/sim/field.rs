use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElasticMaterial, Grid2D};

/// Two-component field on the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: Grid2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                let v = f(grid.node(i, j));
                out.x[k] = v[0];
                out.y[k] = v[1];
            }
        }
        out
    }

    pub fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.grid != *grid || self.x.len() != grid.len() || self.y.len() != grid.len() {
            return Err(Error::Shape(format!(
                "field on a {}x{} grid does not match the {}x{} grid",
                self.grid.nx, self.grid.ny, grid.nx, grid.ny
            )));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        let k = self.grid.index(i, j);
        [self.x[k], self.y[k]]
    }

    /// `sqrt(Σ |u|² h²)` over all nodes.
    pub fn l2(&self) -> f64 {
        let s: f64 = self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).sum();
        (s * self.grid.h * self.grid.h).sqrt()
    }

    /// `l2` restricted to nodes at least `margin` nodes away from the edges.
    pub fn l2_interior(&self, margin: usize) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for j in margin..g.ny.saturating_sub(margin) {
            for i in margin..g.nx.saturating_sub(margin) {
                let k = g.index(i, j);
                s += self.x[k] * self.x[k] + self.y[k] * self.y[k];
            }
        }
        (s * g.h * g.h).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        other.check_grid(&self.grid)?;
        Ok(Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        other.check_grid(&self.grid)?;
        Ok(Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Lamé parameters and density sampled at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalMaterial {
    pub grid: Grid2D,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
}

impl NodalMaterial {
    pub fn sample(material: &ElasticMaterial, grid: Grid2D) -> Result<Self> {
        let rows = (0..grid.ny)
            .into_par_iter()
            .map(|j| {
                (0..grid.nx)
                    .map(|i| {
                        material.moduli(&grid.node(i, j)).map_err(|e| match e {
                            Error::Model(msg) => Error::Model(format!("{msg} (node ({i}, {j}))")),
                            other => other,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self {
            grid,
            lambda: Vec::with_capacity(grid.len()),
            mu: Vec::with_capacity(grid.len()),
            rho: Vec::with_capacity(grid.len()),
        };
        for (l, m, r) in rows.into_iter().flatten() {
            out.lambda.push(l);
            out.mu.push(m);
            out.rho.push(r);
        }
        Ok(out)
    }

    pub fn homogeneous(grid: Grid2D, lambda: f64, mu: f64, rho: f64) -> Self {
        Self { grid, lambda: vec![lambda; grid.len()], mu: vec![mu; grid.len()], rho: vec![rho; grid.len()] }
    }

    pub fn max_cp(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| ((self.lambda[k] + 2.0 * self.mu[k]) / self.rho[k]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn min_cs(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| (self.mu[k] / self.rho[k]).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}
