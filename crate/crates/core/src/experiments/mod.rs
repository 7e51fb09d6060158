//! The two convergence studies: a smooth example with known optimal control
//! under box constraints, and an unconstrained terminal-tracking example with
//! singular data whose error is estimated against a finer level.

mod example_one;
mod example_two;
mod record;
mod transfer;

pub use example_one::{
    example_one_errors, example_one_problem, run_example_one, sampled_exact_control, verify_exactness_example_one,
    ExampleOneData, RunSettings,
};
pub use example_two::{
    example_two_problem, run_example_two, solve_example_two_level, transfer_error, ExampleTwoData, LevelSolution,
};
pub use record::{compute_eoc, ConvergenceRecord, LevelRow};
pub use transfer::{Correspondence, TRANSFER_TOL};
