//! Planar (P-SV) finite-difference solver for the isotropic elastic system
//! `ρ u_tt = div σ(u)` on a box, driven by Dirichlet boundary sources and
//! recording boundary tractions `σ(u)·ν`.

mod field;
mod operator;
mod solver;
mod source;

pub use field::{NodalMaterial, VectorField};
pub use operator::{apply_elastic_operator, apply_elastic_operator_expanded, stress, stress_tensor};
pub use solver::{
    energy, simulate_dn, step, DnRun, SimConfig, Simulation, TractionTrace, WavefieldState,
};
pub use source::{BoundarySource, Edge, Receiver, Ricker};
