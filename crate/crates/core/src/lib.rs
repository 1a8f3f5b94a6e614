//! Distributionally robust estimation of precision matrices over a Wasserstein ball of
//! Gaussian distributions.
//!
//! The estimator minimizes the worst-case Stein loss over all normal distributions within a
//! Wasserstein radius `ρ` of the empirical one. Without structural information it has a
//! closed form ([`shrinkage`]) that shrinks the sample eigenvalues; with known zeros of the
//! precision matrix it is computed by a sequential quadratic approximation ([`sqa`]).
//! [`worst_case`] recovers the extremal distribution, [`baselines`] and [`cv`] provide the
//! comparison estimators and parameter tuning, and [`applications`] runs the synthetic
//! benchmark, discriminant analysis and portfolio backtests.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod baselines;
pub mod cv;
pub mod error;
pub mod geometry;
pub mod io;
pub mod matrix;
mod roots;
pub mod shrinkage;
pub mod sqa;
pub mod worst_case;

pub use error::{Error, Result};
pub use matrix::{SpectralDecomposition, SymmetricMatrix};
