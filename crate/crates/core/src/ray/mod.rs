//! Bicharacteristic ray tracing and lens relations.

pub mod flow;
pub mod lens;

pub use flow::{
    hamiltonian, integrate_bicharacteristic, max_hamiltonian_drift, PhasePoint, DEFAULT_MAX_STEPS,
};
pub use lens::{
    entry_direction, lens_table, scattering_relation, step_halving, BoundaryDirection,
    BoundarySampling, ConvergenceReport, LensEntry, LensRecord, LensStatus, LensTable, RayConfig,
};
