use std::time::Instant;

use serde::Serialize;

use super::derivatives::Expansion;
use super::direction::{direction_from_model, projected_gradient};
use super::line_search::backtrack;
use super::pattern::SparsityPattern;
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::shrinkage::{
    covariance_spectrum, wasserstein_shrinkage, ShrinkageSolution, DEFAULT_GAMMA_TOL,
};
use crate::worst_case::extremal_gamma;

/// Predicted decreases above this are treated as zero.
const STATIONARY_DELTA: f64 = -1e-14;

/// Relative regularization added to a singular sample covariance.
pub const SINGULAR_RIDGE: f64 = 1e-8;

/// How the search direction is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepKind {
    /// Minimizer of the second-order model.
    Newton,
    /// The Hessian replaced by the identity: `−Pg`.
    SteepestDescent,
}

/// Where the iteration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// `(I, gamma0)`.
    Identity,
    /// The unconstrained closed-form solution with the pattern entries zeroed, or its
    /// diagonal if that is not feasible; the multiplier is the closed-form one.
    Analytical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Armijo parameter `σ ∈ (0, ½)`.
    pub sigma: f64,
    /// Stop once the projected gradient norm is at most this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub max_halvings: u32,
    /// Relative residual target for the inner linear solve.
    pub linear_tol: f64,
    /// Starting multiplier; the start point is `(I, gamma0)`, so it must exceed one.
    pub gamma0: f64,
    pub step_kind: StepKind,
    pub start: StartPoint,
    /// After every accepted step, replace `γ` by its exact minimizer for the current `X`.
    pub refresh_multiplier: bool,
    /// Solve each Newton system only to relative residual `max(linear_tol, min(½, ‖Pg‖))`.
    pub inexact_newton: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-4,
            grad_tol: 1e-3,
            max_iters: 100,
            max_halvings: 60,
            linear_tol: 1e-8,
            gamma0: 2.0,
            step_kind: StepKind::Newton,
            start: StartPoint::Identity,
            refresh_multiplier: false,
            inexact_newton: false,
        }
    }
}

impl SolverConfig {
    /// Defaults plus the closed-form start, multiplier refresh and inexact Newton steps.
    /// Reaches the same optimum in far fewer iterations on ill-conditioned inputs.
    pub fn accelerated() -> Self {
        Self {
            start: StartPoint::Analytical,
            refresh_multiplier: true,
            inexact_newton: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| {
            Err(Error::InvalidParameter {
                name,
                value,
                reason,
            })
        };
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return bad("sigma", self.sigma, "must lie in (0, 0.5)");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", self.grad_tol, "must be positive");
        }
        if !(self.linear_tol > 0.0) {
            return bad("linear_tol", self.linear_tol, "must be positive");
        }
        if !(self.gamma0 > 1.0) || !self.gamma0.is_finite() {
            return bad("gamma0", self.gamma0, "must exceed 1");
        }
        Ok(())
    }
}

fn analytical_start(
    cov: &SymmetricMatrix,
    rho: f64,
    pattern: &SparsityPattern,
) -> Result<(SymmetricMatrix, f64)> {
    let sol = wasserstein_shrinkage(cov, rho, DEFAULT_GAMMA_TOL)?;
    let gamma = sol.dual_multiplier;
    let mut x = sol.precision.into_inner();
    pattern.apply_zeros(&mut x);
    let x = SymmetricMatrix::new(x)?;
    let spec = x.spectral()?;
    if spec.min_eigenvalue() > 0.0 && spec.max_eigenvalue() < gamma {
        return Ok((x, gamma));
    }
    // Diagonal entries lie inside the spectrum of the closed-form solution, below γ.
    let diag: Vec<f64> = (0..x.dim()).map(|i| x[(i, i)]).collect();
    Ok((SymmetricMatrix::from_diagonal(&diag)?, gamma))
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient norm below `grad_tol`.
    GradientTolerance,
    /// Predicted decrease numerically zero.
    Stationary,
    /// Iteration cap reached; the last iterate is returned.
    MaxIterations,
}

/// State after an accepted iteration (index 0 is the starting point).
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub objective: f64,
    pub projected_grad_norm: f64,
    /// Step size that produced this iterate; `None` for the start point.
    pub step_size: Option<f64>,
    pub linear_iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Ridge `ε` added to a singular covariance, zero if none was needed.
    pub regularization: f64,
}

impl SolverTrace {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace has a start record")
    }

    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

/// Sequential quadratic approximation for the robust estimator under zero constraints.
///
/// Starts at `(I, γ₀)`, repeatedly minimizes the local quadratic model over the feasible
/// direction space and backtracks until the step is feasible and decreases the objective
/// sufficiently. A singular `Σ̂` is replaced by `Σ̂ + εI`, `ε = 10⁻⁸·max(1, λ_max)`.
pub fn sqa_solve(
    cov: &SymmetricMatrix,
    rho: f64,
    pattern: &SparsityPattern,
    config: &SolverConfig,
) -> Result<(ShrinkageSolution, SolverTrace)> {
    config.validate()?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "radius must be positive and finite",
        });
    }
    let p = cov.dim();
    if pattern.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: pattern.dim(),
        });
    }
    let spec = covariance_spectrum(cov)?;
    let (cov, regularization) = if spec.is_singular() {
        let eps = SINGULAR_RIDGE * spec.max_eigenvalue().max(1.0);
        (cov.shift_diagonal(eps), eps)
    } else {
        (cov.clone(), 0.0)
    };

    let start = Instant::now();
    let (mut x, mut gamma) = match config.start {
        StartPoint::Identity => (SymmetricMatrix::identity(p), config.gamma0),
        StartPoint::Analytical => analytical_start(&cov, rho, pattern)?,
    };
    if config.refresh_multiplier {
        gamma = extremal_gamma(&cov, &x, rho)?;
    }
    let mut model = Expansion::new(&cov, &x, gamma)?;
    let mut records = Vec::new();
    let mut step_size = None;
    let mut linear_iterations = 0;
    let termination = loop {
        let objective = model.objective(rho);
        let pg = projected_gradient(&model, rho, pattern);
        let grad_norm = pg.x.norm().hypot(pg.g);
        records.push(IterationRecord {
            objective,
            projected_grad_norm: grad_norm,
            step_size,
            linear_iterations,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if grad_norm <= config.grad_tol {
            break Termination::GradientTolerance;
        }
        if records.len() > config.max_iters {
            break Termination::MaxIterations;
        }
        let linear_tol = if config.inexact_newton {
            config.linear_tol.max(grad_norm.min(0.5))
        } else {
            config.linear_tol
        };
        let step = direction_from_model(&model, &pg, pattern, config, linear_tol)?;
        if step.predicted_decrease >= STATIONARY_DELTA {
            break Termination::Stationary;
        }
        let accepted = backtrack(&cov, &x, gamma, rho, objective, &step, config)?;
        x = accepted.x;
        gamma = accepted.gamma;
        model = accepted.model;
        if config.refresh_multiplier {
            gamma = extremal_gamma(&cov, &x, rho)?;
            model = Expansion::new(&cov, &x, gamma)?;
        }
        step_size = Some(accepted.alpha);
        linear_iterations = step.linear_iterations;
    };

    let objective = model.objective(rho);
    let shrunk_eigenvalues = x.spectral()?.eigenvalues;
    Ok((
        ShrinkageSolution {
            precision: x,
            dual_multiplier: gamma,
            shrunk_eigenvalues,
            objective,
            radius: rho,
        },
        SolverTrace {
            records,
            termination,
            regularization,
        },
    ))
}
