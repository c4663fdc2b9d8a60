//! Numerical laboratory for recovering elastic wave speeds from boundary data.
//!
//! The crate traces rays of the conformal metrics `c_p^-2 dx^2` and
//! `c_s^-2 dx^2` to build lens relations, checks strictly convex foliations,
//! synthesizes the elastic Dirichlet-to-Neumann map with a 2D finite
//! difference solver, recovers lens relations from the simulated traces, and
//! inverts lens data back to speeds for radial and depth-layered models.
//!
//! Ray tracing and convexity checks work in 2 and 3 dimensions; the wave
//! solver is planar (P-SV).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod convexity;
pub mod error;
pub mod inversion;
pub mod model;
pub mod ray;
pub mod sim;
pub mod vecn;

pub use error::{Error, Result};
