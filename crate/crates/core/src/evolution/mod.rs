//! Implicit Euler (lowest-order discontinuous Galerkin) time stepping on the
//! moving triangulation, forward and backward, and the discrete space-time
//! inner product.

mod cache;
mod grid;
mod schemes;

pub use cache::SnapshotCache;
pub use grid::{DgFunction, TimeGrid};
pub use schemes::{
    adjoint_stability, apply_adjoint_operator, apply_state_operator, apply_terminal_adjoint, apply_terminal_operator,
    discrete_inner, discrete_norm, mass_loads, solve_adjoint, solve_state, solve_state_rescaled, state_stability,
    AdjointRemainder, StabilityFunctionals,
};
