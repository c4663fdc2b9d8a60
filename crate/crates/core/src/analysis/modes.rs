use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Grid2D;
use crate::sim::VectorField;

/// Fourth-order first-derivative matrix on `n` nodes with spacing `h`,
/// one-sided fourth-order closures on the two outermost nodes of each end.
pub fn difference_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let s = 1.0 / (12.0 * h);
    let left0 = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let left1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
    for (c, w) in left0.iter().enumerate() {
        d[(0, c)] = w * s;
        d[(n - 1, n - 1 - c)] = -w * s;
    }
    for (c, w) in left1.iter().enumerate() {
        d[(1, c)] = w * s;
        d[(n - 2, n - 1 - c)] = -w * s;
    }
    for i in 2..n - 2 {
        d[(i, i - 2)] = s;
        d[(i, i - 1)] = -8.0 * s;
        d[(i, i + 1)] = 8.0 * s;
        d[(i, i + 2)] = -s;
    }
    d
}

/// Curl-free part, divergence-free part and the reconstruction residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFields {
    pub p_part: VectorField,
    pub s_part: VectorField,
    /// `‖u − p − s‖`
    pub residual: f64,
    /// `‖curl p‖ / ‖u‖` with the projector's difference operators.
    pub curl_p: f64,
    /// `‖div s‖ / ‖u‖` with the adjoint of the discrete gradient.
    pub div_s: f64,
}

/// Least-squares projector onto discrete gradients `G φ`, with
/// `G = (D_x, D_y)` built from [`difference_matrix`].
pub struct ModeProjector {
    grid: Grid2D,
    dx: DMatrix<f64>,
    dy: DMatrix<f64>,
    vx: DMatrix<f64>,
    vy: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl ModeProjector {
    pub const MIN_NODES: usize = 16;

    pub fn new(grid: Grid2D) -> Result<Self> {
        if grid.nx < Self::MIN_NODES || grid.ny < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "mode projection needs at least {} nodes per axis, got {} x {}",
                Self::MIN_NODES,
                grid.nx,
                grid.ny
            )));
        }
        let dx = difference_matrix(grid.nx, grid.h);
        let dy = difference_matrix(grid.ny, grid.h);
        let eig = |d: &DMatrix<f64>, axis: &str| -> Result<(DMatrix<f64>, Vec<f64>)> {
            let n = d.nrows();
            let e = SymmetricEigen::try_new(d.transpose() * d, f64::EPSILON, 100 * n).ok_or_else(|| {
                Error::Numerical(format!(
                    "symmetric eigensolver did not converge for the {axis} axis ({n} nodes, {} iterations)",
                    100 * n
                ))
            })?;
            Ok((e.eigenvectors, e.eigenvalues.iter().copied().collect()))
        };
        let (vx, lx) = eig(&dx, "x")?;
        let (vy, ly) = eig(&dy, "y")?;
        let top = lx.iter().cloned().fold(0.0, f64::max) + ly.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-11 * top;
        let inv = DMatrix::from_fn(grid.ny, grid.nx, |j, i| {
            let l = ly[j] + lx[i];
            if l > tol {
                1.0 / l
            } else {
                0.0
            }
        });
        Ok(Self { grid, dx, dy, vx, vy, inv })
    }

    fn as_matrix(&self, f: &[f64]) -> DMatrix<f64> {
        // rows are y, columns x
        DMatrix::from_row_slice(self.grid.ny, self.grid.nx, f)
    }

    fn to_vec(m: &DMatrix<f64>) -> Vec<f64> {
        m.transpose().as_slice().to_vec()
    }

    /// `(D_x f, D_y f)` for a node-major scalar field.
    fn gradient(&self, phi: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (phi * self.dx.transpose(), &self.dy * phi)
    }

    /// `Gᵀ u`, the negative of a discrete divergence.
    fn adjoint(&self, ux: &DMatrix<f64>, uy: &DMatrix<f64>) -> DMatrix<f64> {
        ux * &self.dx + self.dy.transpose() * uy
    }

    pub fn project(&self, u: &VectorField) -> Result<ModeFields> {
        u.check_grid(&self.grid)?;
        let ux = self.as_matrix(&u.x);
        let uy = self.as_matrix(&u.y);
        let b = self.adjoint(&ux, &uy);
        let bh = self.vy.transpose() * b * &self.vx;
        let phih = bh.component_mul(&self.inv);
        let phi = &self.vy * phih * self.vx.transpose();
        let (px, py) = self.gradient(&phi);
        let p_part = VectorField { grid: self.grid, x: Self::to_vec(&px), y: Self::to_vec(&py) };
        let s_part = u.sub(&p_part)?;
        let residual = u.sub(&p_part.add(&s_part)?)?.l2();
        let norm = u.l2().max(f64::MIN_POSITIVE);
        let h2 = self.grid.h * self.grid.h;
        let curl = &py * self.dx.transpose() - &self.dy * &px;
        let div = self.adjoint(&self.as_matrix(&s_part.x), &self.as_matrix(&s_part.y));
        Ok(ModeFields {
            curl_p: (curl.norm_squared() * h2).sqrt() / norm,
            div_s: (div.norm_squared() * h2).sqrt() / norm,
            p_part,
            s_part,
            residual,
        })
    }
}

/// Splits `u` into its discrete gradient part and the remainder.
pub fn project_modes(u: &VectorField) -> Result<ModeFields> {
    ModeProjector::new(u.grid)?.project(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_matrix_is_exact_on_quartics() {
        let n = 12;
        let h = 0.1;
        let d = difference_matrix(n, h);
        let f = nalgebra::DVector::from_fn(n, |i, _| (i as f64 * h).powi(4) - 2.0 * (i as f64 * h));
        let df = &d * f;
        for i in 0..n {
            let x = i as f64 * h;
            assert!((df[i] - (4.0 * x.powi(3) - 2.0)).abs() < 1e-10, "{i}");
        }
    }

    #[test]
    fn gradients_are_kept_and_rotated_gradients_removed() {
        let g = Grid2D::new([0.0, 0.0], 1.0 / 47.0, 48, 48).unwrap();
        let grad = VectorField::from_fn(g, |x| [2.0 * x[0] * x[1], x[0] * x[0] + 1.0]);
        let m = project_modes(&grad).unwrap();
        assert!(m.s_part.l2() < 1e-10 * grad.l2());
        assert_eq!(m.residual, 0.0);
        let small = Grid2D::new([0.0, 0.0], 0.1, 8, 8).unwrap();
        assert!(matches!(project_modes(&VectorField::zeros(small)), Err(Error::Config(_))));
    }
}
