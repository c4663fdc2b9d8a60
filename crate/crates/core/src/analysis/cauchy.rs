use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of samples on a coordinate plane `x_axis = const`; the outward
/// normal is `sign · e_axis`. Tangential axes are the remaining ones in
/// increasing order, the first varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatSurface {
    pub axis: usize,
    pub sign: f64,
    pub h: f64,
    /// Node counts along the tangential axes.
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceGeometry {
    Flat(FlatSurface),
    /// Sphere of the given radius; not supported by the reconstruction.
    Sphere { radius: f64 },
}

impl FlatSurface {
    fn check<const D: usize>(&self, lens: &[usize]) -> Result<usize> {
        if self.axis >= D || self.shape.len() != D - 1 {
            return Err(Error::Shape(format!(
                "surface with normal axis {} and {} tangential counts in dimension {D}",
                self.axis,
                self.shape.len()
            )));
        }
        if self.shape.iter().any(|&n| n < 3) || !(self.h > 0.0) || self.sign.abs() != 1.0 {
            return Err(Error::Config("surface needs >= 3 nodes per axis, h > 0 and sign ±1".into()));
        }
        let n: usize = self.shape.iter().product();
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Shape(format!("surface has {n} nodes, inputs have lengths {lens:?}")));
        }
        Ok(n)
    }

    fn tangential_axes<const D: usize>(&self) -> Vec<usize> {
        (0..D).filter(|&a| a != self.axis).collect()
    }

    /// `∂/∂x_t` of component `c` of `u` along tangential slot `t`: centred
    /// inside, one-sided second order at the ends.
    fn tangential_derivative<const D: usize>(&self, u: &[[f64; D]], c: usize, t: usize, k: usize) -> f64 {
        let stride: usize = self.shape[..t].iter().product();
        let n = self.shape[t];
        let i = (k / stride) % n;
        let at = |off: isize| u[(k as isize + off * stride as isize) as usize][c];
        let h = self.h;
        if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
        } else {
            (at(1) - at(-1)) / (2.0 * h)
        }
    }
}

fn flat(geometry: &SurfaceGeometry) -> Result<&FlatSurface> {
    match geometry {
        SurfaceGeometry::Flat(f) => Ok(f),
        SurfaceGeometry::Sphere { radius } => Err(Error::Unsupported(format!(
            "Neumann-to-Cauchy conversion is implemented for flat surfaces only (got a sphere of radius {radius})"
        ))),
    }
}

/// Normal derivative `∂_axis u` on a flat surface from the displacement and
/// the traction `N = σ(u)·ν` there:
///
/// `∂_n u_α = s N_α / μ − ∂_α u_n` for tangential `α`, and
/// `∂_n u_n = (s N_n − λ Σ_α ∂_α u_α) / (λ + 2μ)`, with `s` the normal sign.
pub fn neumann_to_cauchy<const D: usize>(
    geometry: &SurfaceGeometry,
    u: &[[f64; D]],
    traction: &[[f64; D]],
    lambda: &[f64],
    mu: &[f64],
) -> Result<Vec<[f64; D]>> {
    let surf = flat(geometry)?;
    let n = surf.check::<D>(&[u.len(), traction.len(), lambda.len(), mu.len()])?;
    let tan = surf.tangential_axes::<D>();
    let a = surf.axis;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (l, m) = (lambda[k], mu[k]);
        if !(m > 0.0) || !(l + 2.0 * m > 0.0) {
            return Err(Error::Model(format!("need mu > 0 and lambda + 2 mu > 0 at surface node {k}")));
        }
        let mut du = [0.0; D];
        let mut div_tan = 0.0;
        for (t, &alpha) in tan.iter().enumerate() {
            div_tan += surf.tangential_derivative(u, alpha, t, k);
            du[alpha] = surf.sign * traction[k][alpha] / m - surf.tangential_derivative(u, a, t, k);
        }
        du[a] = (surf.sign * traction[k][a] - l * div_tan) / (l + 2.0 * m);
        out.push(du);
    }
    Ok(out)
}

/// `σ(u)·ν` from the displacement and its normal derivative on the surface.
pub fn traction_from_cauchy<const D: usize>(
    geometry: &SurfaceGeometry,
    u: &[[f64; D]],
    du_normal: &[[f64; D]],
    lambda: &[f64],
    mu: &[f64],
) -> Result<Vec<[f64; D]>> {
    let surf = flat(geometry)?;
    let n = surf.check::<D>(&[u.len(), du_normal.len(), lambda.len(), mu.len()])?;
    let tan = surf.tangential_axes::<D>();
    let a = surf.axis;
    Ok((0..n)
        .map(|k| {
            // grad[i][j] = ∂_j u_i
            let mut grad = [[0.0; D]; D];
            for i in 0..D {
                grad[i][a] = du_normal[k][i];
                for (t, &alpha) in tan.iter().enumerate() {
                    grad[i][alpha] = surf.tangential_derivative(u, i, t, k);
                }
            }
            let div: f64 = (0..D).map(|i| grad[i][i]).sum();
            std::array::from_fn(|i| {
                let sigma_ia = mu[k] * (grad[i][a] + grad[a][i]) + if i == a { lambda[k] * div } else { 0.0 };
                surf.sign * sigma_ia
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_give_zero_derivative() {
        let g = SurfaceGeometry::Flat(FlatSurface { axis: 1, sign: 1.0, h: 0.1, shape: vec![5] });
        let z = vec![[0.0; 2]; 5];
        let d = neumann_to_cauchy::<2>(&g, &z, &z, &[1.0; 5], &[1.0; 5]).unwrap();
        assert!(d.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn curved_surfaces_are_unsupported() {
        let g = SurfaceGeometry::Sphere { radius: 1.0 };
        let z = vec![[0.0; 3]; 4];
        assert!(matches!(
            neumann_to_cauchy::<3>(&g, &z, &z, &[1.0; 4], &[1.0; 4]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn planar_linear_field_round_trips() {
        // u = (x + 2y, 3x - y) on y = 0 with outward normal -e_y
        let n = 7;
        let h = 0.25;
        let g = SurfaceGeometry::Flat(FlatSurface { axis: 1, sign: -1.0, h, shape: vec![n] });
        let u: Vec<[f64; 2]> = (0..n).map(|i| { let x = i as f64 * h; [x, 3.0 * x] }).collect();
        let (l, m) = (2.0, 0.5);
        let du_true = vec![[2.0, -1.0]; n];
        let tr = traction_from_cauchy::<2>(&g, &u, &du_true, &[l; 7], &[m; 7]).unwrap();
        // σ = [[λ·0 + 2μ·1, μ(2 + 3)], [μ·5, λ·0 + 2μ(-1)]], ν = (0, -1)
        assert!((tr[3][0] + 2.5).abs() < 1e-14 && (tr[3][1] - 1.0).abs() < 1e-14);
        let du = neumann_to_cauchy::<2>(&g, &u, &tr, &[l; 7], &[m; 7]).unwrap();
        for d in du {
            assert!((d[0] - 2.0).abs() < 1e-13 && (d[1] + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn manufactured_three_dimensional_field() {
        // u = (x1 x3, x2², x1 + x3²), λ = 1, μ = 2, surface x3 = 0 with normal +e3
        let (n1, n2, h) = (6, 5, 0.2);
        let g = SurfaceGeometry::Flat(FlatSurface { axis: 2, sign: 1.0, h, shape: vec![n1, n2] });
        let mut u = Vec::new();
        let mut tr = Vec::new();
        let mut expect = Vec::new();
        for j in 0..n2 {
            for i in 0..n1 {
                let (x1, x2) = (i as f64 * h, j as f64 * h);
                u.push([0.0, x2 * x2, x1]);
                tr.push([2.0 * (x1 + 1.0), 0.0, 2.0 * x2]);
                expect.push([x1, 0.0, 0.0]);
            }
        }
        let m = n1 * n2;
        let du = neumann_to_cauchy::<3>(&g, &u, &tr, &vec![1.0; m], &vec![2.0; m]).unwrap();
        for (d, e) in du.iter().zip(&expect) {
            for c in 0..3 {
                assert!((d[c] - e[c]).abs() < 1e-12, "{d:?} vs {e:?}");
            }
        }
    }
}
