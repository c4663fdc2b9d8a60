//! JSON model files.
//!
//! ```json
//! { "format": 1,
//!   "speed": {"kind": "radial", "profile": [[0.0, 2.0], [1.0, 1.0]]},
//!   "material": {"lambda": 1.0, "mu": 1.0, "rho": 1.0},
//!   "domain": {"shape": "disk", "radius": 1.0} }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::domain::{Domain, Grid2D};
use crate::model::field::{GridField, GridInterp, Profile1D, ScalarField, SpeedField};
use crate::model::material::{ElasticMaterial, Mode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        #[serde(alias = "value")]
        c: f64,
    },
    /// Monotone cubic through `[r, c]` nodes.
    Radial { profile: Vec<[f64; 2]> },
    /// `a + b r`
    RadialAffine { a: f64, b: f64 },
    /// `1 / (a + b r)`
    RadialReciprocal { a: f64, b: f64 },
    /// `a + b·x`
    Linear { a: f64, b: Vec<f64> },
    /// Tabulated in the last coordinate.
    Depth {
        profile: Vec<[f64; 2]>,
        #[serde(default)]
        interp: TableInterp,
    },
    /// Node values, `values[j][i]` at `origin + h (i, j)`.
    Grid {
        origin: [f64; 2],
        h: f64,
        values: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interp: Option<GridInterpSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableInterp {
    #[default]
    Cubic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridInterpSpec {
    Bicubic,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueOrField {
    Value(f64),
    Field(FieldSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub lambda: ValueOrField,
    pub mu: ValueOrField,
    pub rho: ValueOrField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialSpec>,
    pub domain: Domain,
}

impl FieldSpec {
    /// Builds the field. `default_grid` is the interpolant used when a grid
    /// does not name one (bicubic for speeds, bilinear for material fields).
    pub fn build(&self, default_grid: GridInterp) -> Result<ScalarField> {
        Ok(match self {
            FieldSpec::Constant { c } => ScalarField::Constant(*c),
            FieldSpec::Radial { profile } => ScalarField::Radial(Profile1D::table(profile)?),
            FieldSpec::RadialAffine { a, b } => ScalarField::Radial(Profile1D::Affine { a: *a, b: *b }),
            FieldSpec::RadialReciprocal { a, b } => {
                ScalarField::Radial(Profile1D::Reciprocal { a: *a, b: *b })
            }
            FieldSpec::Linear { a, b } => ScalarField::Linear { a: *a, b: b.clone() },
            FieldSpec::Depth { profile, interp } => ScalarField::Depth(match interp {
                TableInterp::Cubic => Profile1D::table(profile)?,
                TableInterp::Linear => Profile1D::piecewise_linear(profile)?,
            }),
            FieldSpec::Grid { origin, h, values, interp } => {
                let ny = values.len();
                let nx = values.first().map_or(0, Vec::len);
                if let Some(j) = values.iter().position(|row| row.len() != nx) {
                    return Err(Error::Shape(format!("grid row {j} has a different length")));
                }
                let grid = Grid2D::new(*origin, *h, nx, ny)?;
                let interp = match interp {
                    Some(GridInterpSpec::Bicubic) => GridInterp::Bicubic,
                    Some(GridInterpSpec::Bilinear) => GridInterp::Bilinear,
                    None => default_grid,
                };
                ScalarField::Grid(GridField::new(grid, values.concat(), interp)?)
            }
        })
    }
}

impl ValueOrField {
    fn build(&self) -> Result<ScalarField> {
        match self {
            ValueOrField::Value(v) => Ok(ScalarField::Constant(*v)),
            ValueOrField::Field(f) => f.build(GridInterp::Bilinear),
        }
    }
}

/// A parsed model: speed and/or material on a domain.
#[derive(Debug, Clone)]
pub struct Model {
    pub speed: Option<SpeedField>,
    pub material: Option<ElasticMaterial>,
    pub domain: Domain,
    pub spec: ModelFile,
}

impl Model {
    pub fn from_spec(spec: ModelFile) -> Result<Self> {
        if spec.format != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format {} (expected {FORMAT_VERSION})",
                spec.format
            )));
        }
        spec.domain.validate()?;
        if spec.speed.is_none() && spec.material.is_none() {
            return Err(Error::Config("model needs a speed or a material".into()));
        }
        let speed = spec.speed.as_ref().map(|s| s.build(GridInterp::Bicubic)).transpose()?;
        let material = spec
            .material
            .as_ref()
            .map(|m| -> Result<_> {
                Ok(ElasticMaterial::new(m.lambda.build()?, m.mu.build()?, m.rho.build()?))
            })
            .transpose()?;
        Ok(Self {
            speed,
            material,
            domain: spec.domain.clone(),
            spec,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Speed used for ray tracing: the explicit speed when `mode` is `None`,
    /// else the material's P or S speed.
    pub fn speed_for(&self, mode: Option<Mode>) -> Result<SpeedField> {
        match mode {
            None => self
                .speed
                .clone()
                .or_else(|| self.material.as_ref().map(|m| m.speed_field(Mode::P)))
                .ok_or_else(|| Error::Config("model has no speed".into())),
            Some(mode) => self
                .material
                .as_ref()
                .map(|m| m.speed_field(mode))
                .ok_or_else(|| Error::Config("model has no material".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_shapes() {
        let m = Model::from_json(
            r#"{"format": 1,
                "speed": {"kind": "radial", "profile": [[0.0, 2.0], [0.5, 1.5], [1.0, 1.0]]},
                "material": {"lambda": 1.0, "mu": {"kind": "constant", "c": 1.0}, "rho": 1.0},
                "domain": {"shape": "disk", "radius": 1.0}}"#,
        )
        .unwrap();
        assert!((m.speed.unwrap().eval(&[0.3, 0.0]).unwrap() - 1.7).abs() < 1e-14);
        let (cp, cs) = m.material.unwrap().wave_speeds(&[0.0, 0.0]).unwrap();
        assert!((cp - 3f64.sqrt()).abs() < 1e-15 && cs == 1.0);
    }

    #[test]
    fn grid_speed() {
        let rows: Vec<Vec<f64>> = (0..8).map(|j| (0..9).map(|i| 1.0 + 0.1 * (i + j) as f64).collect()).collect();
        let spec = ModelFile {
            format: 1,
            speed: Some(FieldSpec::Grid { origin: [0.0, 0.0], h: 0.125, values: rows, interp: None }),
            material: None,
            domain: Domain::unit_box::<2>(),
        };
        let text = serde_json::to_string(&spec).unwrap();
        let m = Model::from_json(&text).unwrap();
        assert_eq!(m.spec, spec);
        let v = m.speed.unwrap().eval(&[0.25, 0.5]).unwrap();
        assert!((v - 1.6).abs() < 1e-13);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let r = Model::from_json(r#"{"format": 2, "speed": {"kind": "constant", "c": 1.0}, "domain": {"shape": "disk", "radius": 1.0}}"#);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = Model::from_json("{\"format\": 1,\n \"speed\": }").unwrap_err();
        match err {
            Error::Json(e) => assert_eq!(e.line(), 2),
            other => panic!("{other:?}"),
        }
    }
}
