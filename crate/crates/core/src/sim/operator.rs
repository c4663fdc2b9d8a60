use rayon::prelude::*;

use crate::error::Result;
use crate::model::ElasticMaterial;
use crate::sim::field::{NodalMaterial, VectorField};

/// `σ = λ (div u) I + μ (∇u + ∇uᵀ)` with `grad_u[i][j] = ∂_j u_i`.
pub fn stress(lambda: f64, mu: f64, grad_u: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let div = grad_u[0][0] + grad_u[1][1];
    let off = mu * (grad_u[0][1] + grad_u[1][0]);
    [
        [lambda * div + 2.0 * mu * grad_u[0][0], off],
        [off, lambda * div + 2.0 * mu * grad_u[1][1]],
    ]
}

/// Stress at `x` for the material's moduli there.
pub fn stress_tensor(material: &ElasticMaterial, x: &[f64; 2], grad_u: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let (l, m, _) = material.moduli(x)?;
    Ok(stress(l, m, grad_u))
}

/// Fills interior rows of `out` using `f(i, j, k) -> (ax, ay)`; edge nodes
/// are left at zero.
fn interior_map(
    mat: &NodalMaterial,
    out: &mut VectorField,
    f: impl Fn(usize, usize) -> (f64, f64) + Sync,
) {
    let g = mat.grid;
    let nx = g.nx;
    out.x
        .par_chunks_mut(nx)
        .zip(out.y.par_chunks_mut(nx))
        .enumerate()
        .filter(|(j, _)| *j > 0 && *j + 1 < g.ny)
        .for_each(|(j, (rx, ry))| {
            for i in 1..nx - 1 {
                let (ax, ay) = f(i, j);
                let k = g.index(i, j);
                let rho = mat.rho[k];
                rx[i] = ax / rho;
                ry[i] = ay / rho;
            }
        });
}

/// `ρ⁻¹ div σ(u)` in conservative form at interior nodes (zero on the edges).
///
/// Normal-normal terms use face-averaged moduli, mixed terms nested centred
/// differences, so that `-ρE` is a symmetric positive semidefinite matrix for
/// homogeneous Dirichlet data.
pub fn apply_elastic_operator(mat: &NodalMaterial, u: &VectorField) -> Result<VectorField> {
    let mut out = VectorField::zeros(mat.grid);
    apply_into(mat, u, &mut out)?;
    Ok(out)
}

pub(crate) fn apply_into(mat: &NodalMaterial, u: &VectorField, out: &mut VectorField) -> Result<()> {
    u.check_grid(&mat.grid)?;
    out.check_grid(&mat.grid)?;
    let g = mat.grid;
    let nx = g.nx;
    let ih2 = 1.0 / (g.h * g.h);
    let iq = 0.25 * ih2;
    let (lam, mu) = (&mat.lambda, &mat.mu);
    let (ux, uy) = (&u.x, &u.y);
    let p = |k: usize| lam[k] + 2.0 * mu[k];
    interior_map(mat, out, |i, j| {
        let k = g.index(i, j);
        let (e, w, n, s) = (k + 1, k - 1, k + nx, k - nx);
        let (ne, nw, se, sw) = (n + 1, n - 1, s + 1, s - 1);
        let pe = 0.5 * (p(k) + p(e));
        let pw = 0.5 * (p(k) + p(w));
        let pn = 0.5 * (p(k) + p(n));
        let ps = 0.5 * (p(k) + p(s));
        let me = 0.5 * (mu[k] + mu[e]);
        let mw = 0.5 * (mu[k] + mu[w]);
        let mn = 0.5 * (mu[k] + mu[n]);
        let ms = 0.5 * (mu[k] + mu[s]);
        let ax = ih2 * (pe * (ux[e] - ux[k]) - pw * (ux[k] - ux[w]))
            + ih2 * (mn * (ux[n] - ux[k]) - ms * (ux[k] - ux[s]))
            + iq * (lam[e] * (uy[ne] - uy[se]) - lam[w] * (uy[nw] - uy[sw]))
            + iq * (mu[n] * (uy[ne] - uy[nw]) - mu[s] * (uy[se] - uy[sw]));
        let ay = ih2 * (pn * (uy[n] - uy[k]) - ps * (uy[k] - uy[s]))
            + ih2 * (me * (uy[e] - uy[k]) - mw * (uy[k] - uy[w]))
            + iq * (lam[n] * (ux[ne] - ux[nw]) - lam[s] * (ux[se] - ux[sw]))
            + iq * (mu[e] * (ux[ne] - ux[se]) - mu[w] * (ux[nw] - ux[sw]));
        (ax, ay)
    });
    Ok(())
}

/// The same operator in non-divergence form, with coefficient derivatives
/// taken by centred differences of the nodal moduli.
pub fn apply_elastic_operator_expanded(mat: &NodalMaterial, u: &VectorField) -> Result<VectorField> {
    u.check_grid(&mat.grid)?;
    let g = mat.grid;
    let nx = g.nx;
    let ih2 = 1.0 / (g.h * g.h);
    let i2h = 0.5 / g.h;
    let (lam, mu) = (&mat.lambda, &mat.mu);
    let (ux, uy) = (&u.x, &u.y);
    let mut out = VectorField::zeros(g);
    interior_map(mat, &mut out, |i, j| {
        let k = g.index(i, j);
        let (e, w, n, s) = (k + 1, k - 1, k + nx, k - nx);
        let (ne, nw, se, sw) = (n + 1, n - 1, s + 1, s - 1);
        let dx = |f: &[f64]| (f[e] - f[w]) * i2h;
        let dy = |f: &[f64]| (f[n] - f[s]) * i2h;
        let dxx = |f: &[f64]| (f[e] - 2.0 * f[k] + f[w]) * ih2;
        let dyy = |f: &[f64]| (f[n] - 2.0 * f[k] + f[s]) * ih2;
        let dxy = |f: &[f64]| 0.25 * (f[ne] - f[se] - f[nw] + f[sw]) * ih2;
        let (l, m) = (lam[k], mu[k]);
        let div = dx(ux) + dy(uy);
        let shear = dy(ux) + dx(uy);
        let ax = (l + 2.0 * m) * dxx(ux) + m * dyy(ux) + (l + m) * dxy(uy)
            + dx(lam) * div
            + 2.0 * dx(mu) * dx(ux)
            + dy(mu) * shear;
        let ay = (l + 2.0 * m) * dyy(uy) + m * dxx(uy) + (l + m) * dxy(ux)
            + dy(lam) * div
            + 2.0 * dy(mu) * dy(uy)
            + dx(mu) * shear;
        (ax, ay)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid2D;

    #[test]
    fn stress_examples() {
        let s = stress(1.0, 1.0, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(s, [[4.0, 0.0], [0.0, 4.0]]);
        let r = stress(1.0, 1.0, [[0.0, 0.3], [-0.3, 0.0]]);
        assert_eq!(r, [[0.0, 0.0], [0.0, 0.0]]);
        let g = [[0.3, -1.2], [0.7, 2.1]];
        let gt = [[0.3, 0.7], [-1.2, 2.1]];
        assert_eq!(stress(1.7, 0.4, g), stress(1.7, 0.4, gt));
        let tr = s[0][0] + s[1][1];
        assert_eq!(tr, (2.0 + 2.0) * 2.0);
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = Grid2D::new([0.0, 0.0], 0.05, 21, 17).unwrap();
        let mat = NodalMaterial::homogeneous(g, 1.3, 0.7, 2.0);
        let u = VectorField::from_fn(g, |_| [0.4, -1.1]);
        assert!(apply_elastic_operator(&mat, &u).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn longitudinal_sine_has_p_modulus() {
        let k = 2.0;
        for (n, tol) in [(81usize, 2e-3), (161, 5e-4)] {
            let h = 1.0 / (n - 1) as f64;
            let g = Grid2D::new([0.0, 0.0], h, n, n).unwrap();
            let mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
            let u = VectorField::from_fn(g, |x| [(k * x[0]).sin(), 0.0]);
            let eu = apply_elastic_operator(&mat, &u).unwrap();
            let mut err: f64 = 0.0;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let x = g.node(i, j);
                    let exact = -3.0 * k * k * (k * x[0]).sin();
                    err = err.max((eu.get(i, j)[0] - exact).abs()).max(eu.get(i, j)[1].abs());
                }
            }
            assert!(err < tol, "n = {n}: {err}");
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let g = Grid2D::new([0.0, 0.0], 0.1, 12, 10).unwrap();
        let mut mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
        for k in 0..g.len() {
            mat.lambda[k] = 1.0 + 0.3 * ((k * 7) % 11) as f64 / 11.0;
            mat.mu[k] = 0.5 + 0.4 * ((k * 5) % 13) as f64 / 13.0;
        }
        let field = |seed: usize| {
            let mut f = VectorField::zeros(g);
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    let k = g.index(i, j);
                    f.x[k] = (((k + seed) * 31) % 17) as f64 / 17.0 - 0.5;
                    f.y[k] = (((k + seed) * 23) % 19) as f64 / 19.0 - 0.5;
                }
            }
            f
        };
        let (a, b) = (field(1), field(5));
        let dot = |p: &VectorField, q: &VectorField| -> f64 {
            (0..g.len()).map(|k| mat.rho[k] * (p.x[k] * q.x[k] + p.y[k] * q.y[k])).sum()
        };
        let ab = dot(&a, &apply_elastic_operator(&mat, &b).unwrap());
        let ba = dot(&b, &apply_elastic_operator(&mat, &a).unwrap());
        assert!((ab - ba).abs() < 1e-10 * ab.abs().max(1.0), "{ab} vs {ba}");
        assert!(dot(&a, &apply_elastic_operator(&mat, &a).unwrap()) < 0.0);
    }

    #[test]
    fn expanded_form_matches_for_constant_moduli() {
        let g = Grid2D::new([0.0, 0.0], 0.02, 51, 51).unwrap();
        let mat = NodalMaterial::homogeneous(g, 2.0, 0.5, 1.5);
        let u = VectorField::from_fn(g, |x| [(3.0 * x[0] + x[1]).sin(), (x[0] * x[1]).cos()]);
        let a = apply_elastic_operator(&mat, &u).unwrap();
        let b = apply_elastic_operator_expanded(&mat, &u).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn conservative_and_expanded_forms_converge_together() {
        let diff = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let g = Grid2D::new([0.0, 0.0], h, n, n).unwrap();
            let mut mat = NodalMaterial::homogeneous(g, 1.0, 1.0, 1.0);
            for j in 0..n {
                for i in 0..n {
                    let x = g.node(i, j);
                    let k = g.index(i, j);
                    mat.lambda[k] = 1.0 + 0.5 * (2.0 * x[0] + x[1]).sin();
                    mat.mu[k] = 1.0 + 0.3 * (x[0] - 2.0 * x[1]).cos();
                    mat.rho[k] = 1.0 + 0.2 * x[0] * x[1];
                }
            }
            let u = VectorField::from_fn(g, |x| [(2.0 * x[0]).sin() * x[1], (x[0] + 3.0 * x[1]).cos()]);
            let a = apply_elastic_operator(&mat, &u).unwrap();
            let b = apply_elastic_operator_expanded(&mat, &u).unwrap();
            a.sub(&b).unwrap().max_abs()
        };
        let (d1, d2) = (diff(41), diff(81));
        assert!(d1 / d2 > 3.5, "{d1} / {d2}");
    }
}
