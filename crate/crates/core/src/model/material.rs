use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::field::ScalarField;

/// Wave mode of the isotropic elastic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    P,
    S,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::P => "p",
            Mode::S => "s",
        }
    }
}

/// Isotropic elastic medium: Lamé parameters and density.
#[derive(Debug, Clone)]
pub struct ElasticMaterial {
    pub lambda: ScalarField,
    pub mu: ScalarField,
    pub rho: ScalarField,
}

impl ElasticMaterial {
    pub fn new(lambda: ScalarField, mu: ScalarField, rho: ScalarField) -> Self {
        Self { lambda, mu, rho }
    }

    pub fn homogeneous(lambda: f64, mu: f64, rho: f64) -> Self {
        Self::new(
            ScalarField::Constant(lambda),
            ScalarField::Constant(mu),
            ScalarField::Constant(rho),
        )
    }

    /// (λ, μ, ρ) at `x`, each checked positive.
    pub fn moduli<const D: usize>(&self, x: &[f64; D]) -> Result<(f64, f64, f64)> {
        let named = |f: &ScalarField, name: &str| {
            f.eval(x).map_err(|e| match e {
                Error::Model(msg) => Error::Model(format!("{name} must be positive: {msg}")),
                other => other,
            })
        };
        Ok((named(&self.lambda, "lambda")?, named(&self.mu, "mu")?, named(&self.rho, "rho")?))
    }

    /// `(c_p, c_s)` with `c_p = sqrt((λ+2μ)/ρ)` and `c_s = sqrt(μ/ρ)`.
    pub fn wave_speeds<const D: usize>(&self, x: &[f64; D]) -> Result<(f64, f64)> {
        let (l, m, r) = self.moduli(x)?;
        Ok((((l + 2.0 * m) / r).sqrt(), (m / r).sqrt()))
    }

    pub(crate) fn speed_and_gradient<const D: usize>(
        &self,
        x: &[f64; D],
        mode: Mode,
    ) -> Result<(f64, [f64; D])> {
        let (l, gl) = self.lambda.eval_with_gradient(x)?;
        let (m, gm) = self.mu.eval_with_gradient(x)?;
        let (r, gr) = self.rho.eval_with_gradient(x)?;
        let (modulus, gmod): (f64, [f64; D]) = match mode {
            Mode::P => (l + 2.0 * m, std::array::from_fn(|i| gl[i] + 2.0 * gm[i])),
            Mode::S => (m, gm),
        };
        let c = (modulus / r).sqrt();
        // c = sqrt(M/ρ)  =>  ∇c = (∇M − c²∇ρ) / (2cρ)
        let grad = std::array::from_fn(|i| (gmod[i] - c * c * gr[i]) / (2.0 * c * r));
        Ok((c, grad))
    }

    fn constants(&self) -> Option<(f64, f64, f64)> {
        match (&self.lambda, &self.mu, &self.rho) {
            (ScalarField::Constant(l), ScalarField::Constant(m), ScalarField::Constant(r)) => {
                Some((*l, *m, *r))
            }
            _ => None,
        }
    }

    /// Speed field of one mode.
    pub fn speed_field(&self, mode: Mode) -> ScalarField {
        match self.constants() {
            Some((l, m, r)) => ScalarField::Constant(match mode {
                Mode::P => ((l + 2.0 * m) / r).sqrt(),
                Mode::S => (m / r).sqrt(),
            }),
            None => ScalarField::Material {
                material: Arc::new(self.clone()),
                mode,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_moduli_give_sqrt3_and_one() {
        let m = ElasticMaterial::homogeneous(1.0, 1.0, 1.0);
        let (cp, cs) = m.wave_speeds(&[0.2, 0.1]).unwrap();
        assert!((cp - 3f64.sqrt()).abs() < 1e-15);
        assert!((cs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_substitution() {
        let m = ElasticMaterial::homogeneous(2.0, 1.0, 4.0);
        assert_eq!(m.wave_speeds(&[0.0, 0.0]).unwrap(), (1.0, 0.5));
    }

    #[test]
    fn vanishing_lambda_limit() {
        let m = ElasticMaterial::homogeneous(1e-14, 1.0, 1.0);
        let (cp, cs) = m.wave_speeds(&[0.0, 0.0]).unwrap();
        assert!((cp - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(cs, 1.0);
    }

    #[test]
    fn zero_mu_is_rejected() {
        let m = ElasticMaterial::homogeneous(1.0, 0.0, 1.0);
        match m.wave_speeds(&[0.0, 0.0]) {
            Err(Error::Model(msg)) => assert!(msg.starts_with("mu must be positive")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn derived_speed_gradient_matches_differences() {
        let m = ElasticMaterial::new(
            ScalarField::depth_affine(1.0, 0.5),
            ScalarField::Linear { a: 1.0, b: vec![0.2, 0.1] },
            ScalarField::radial_affine(1.0, 0.3),
        );
        for mode in [Mode::P, Mode::S] {
            let f = m.speed_field(mode);
            let x = [0.3, 0.6];
            let g = f.gradient(&x).unwrap();
            for i in 0..2 {
                let h = 1e-5;
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8);
            }
        }
    }
}
