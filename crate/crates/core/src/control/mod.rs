//! Variationally discretized control problems: the control is never a finite
//! element function of its own but the pointwise projection of the scaled
//! discrete adjoint, integrated exactly on the pieces cut out by the bounds.

mod problem;
mod report;
mod solvers;

pub use problem::{Control, ControlProblemSpec, ProjectedControl, Target};
pub use report::{IterationRecord, SolveReport};
pub use solvers::{
    adjoint_of, control_distance, evaluate_objective, optimality_residual, solve_fixed_point, solve_semismooth_newton,
    solve_terminal, variational_inequality,
};
