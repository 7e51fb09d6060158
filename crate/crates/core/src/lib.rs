//! Finite elements on evolving triangulated surfaces, implicit Euler time
//! stepping, and variationally discretized control-constrained optimal
//! control of the heat equation on a moving sphere.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds and refines triangulated spheres and moves them in time,
//! * [`linalg`] holds the sparse symmetric matrices, their LDLᵀ factorization
//!   and the Krylov solvers,
//! * [`surface_fem`] assembles mass/stiffness matrices and loads, and integrates
//!   bound-projected piecewise linear functions exactly,
//! * [`evolution`] implements the forward and backward time-stepping schemes,
//! * [`control`] solves the reduced optimal control problems,
//! * [`experiments`] reproduces the two convergence studies.

pub mod control;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod surface_fem;

pub use error::{Error, Result};
