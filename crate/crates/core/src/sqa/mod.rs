//! Sequential quadratic approximation for the robust estimator with prescribed zeros
//! in the precision matrix.

mod derivatives;
mod direction;
mod line_search;
mod pattern;
mod solver;

pub use derivatives::{sqa_gradient, sqa_hessian_apply};
pub use direction::{descent_direction, NewtonStep, DENSE_FALLBACK_LIMIT};
pub use line_search::armijo_step;
pub use pattern::{project_pattern, SparsityPattern};
pub use solver::{
    sqa_solve, IterationRecord, SolverConfig, SolverTrace, StartPoint, StepKind, Termination,
    SINGULAR_RIDGE,
};
