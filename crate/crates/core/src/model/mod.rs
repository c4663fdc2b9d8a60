//! Speed fields, elastic materials, domains and grids.

pub mod domain;
pub mod field;
pub mod file;
pub mod interp;
pub mod material;

pub use domain::{Domain, Grid2D, BOUNDARY_TOL};
pub use field::{GridField, GridInterp, Profile1D, ScalarField, SpeedField, COLLAR};
pub use file::{FieldSpec, Model, ModelFile};
pub use material::{ElasticMaterial, Mode};
