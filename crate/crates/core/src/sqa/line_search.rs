use super::derivatives::Expansion;
use super::direction::NewtonStep;
use super::solver::SolverConfig;
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Accepted trial point of a backtracking search.
#[derive(Debug, Clone)]
pub(crate) struct Accepted {
    pub(crate) alpha: f64,
    pub(crate) x: SymmetricMatrix,
    pub(crate) gamma: f64,
    pub(crate) model: Expansion,
}

/// Largest `α = 2⁻ᵐ`, `m ≤ max_halvings`, such that `(γ + αΔγ)I ≻ X + αΔX ≻ 0` and
/// `f(X + αΔX, γ + αΔγ) ≤ f(X, γ) + σαδ`.
pub fn armijo_step(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
    step: &NewtonStep,
    config: &SolverConfig,
) -> Result<f64> {
    let f0 = Expansion::new(cov, x, gamma)?.objective(rho);
    Ok(backtrack(cov, x, gamma, rho, f0, step, config)?.alpha)
}

pub(crate) fn backtrack(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
    f0: f64,
    step: &NewtonStep,
    config: &SolverConfig,
) -> Result<Accepted> {
    let delta = step.predicted_decrease;
    if !(delta < 0.0) {
        return Err(Error::NotDescent { delta });
    }
    let mut alpha = 1.0;
    for _ in 0..=config.max_halvings {
        let trial_x = SymmetricMatrix::new(x.as_matrix() + step.delta_x.as_matrix() * alpha)?;
        let trial_gamma = gamma + alpha * step.delta_gamma;
        // Expansion::new rejects points outside the open cone.
        if let Ok(model) = Expansion::new(cov, &trial_x, trial_gamma) {
            if model.objective(rho) <= f0 + config.sigma * alpha * delta {
                return Ok(Accepted {
                    alpha,
                    x: trial_x,
                    gamma: trial_gamma,
                    model,
                });
            }
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearch {
        halvings: config.max_halvings,
    })
}
