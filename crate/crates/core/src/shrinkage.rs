//! Wasserstein shrinkage estimator without sparsity constraints.
//!
//! The estimator keeps the eigenvectors of the sample covariance `Σ̂` and maps every
//! sample eigenvalue `λᵢ` to a precision eigenvalue
//!
//! ```text
//! xᵢ = γ (1 − 2 / (1 + √(1 + 4/(λᵢγ))))
//! ```
//!
//! where the dual multiplier `γ > 0` is the unique root of the increasing function
//!
//! ```text
//! φ(γ) = (ρ² − ½ Σλᵢ) γ − p + ½ Σ √(λᵢ²γ² + 4λᵢγ).
//! ```
//!
//! All formulas below are evaluated in cancellation-free forms.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix::{check_psd, SpectralDecomposition, SymmetricMatrix, PSD_CLAMP_TOL};
use crate::roots::increasing_root;

/// Default absolute tolerance on `|φ(γ)|`.
pub const DEFAULT_GAMMA_TOL: f64 = 1e-12;

/// Solution of the robust estimation problem.
#[derive(Debug, Clone)]
pub struct ShrinkageSolution {
    /// Estimated precision matrix `X̂ ≻ 0`.
    pub precision: SymmetricMatrix,
    /// Multiplier `γ*` of the Wasserstein constraint.
    pub dual_multiplier: f64,
    /// Eigenvalues of `X̂`. For the analytical estimator they are aligned with the
    /// ascending eigenvalues of `Σ̂` (and therefore descending); for the iterative solver
    /// they are the ascending eigenvalues of the returned iterate.
    pub shrunk_eigenvalues: DVector<f64>,
    /// Objective value `f(X̂, γ*)` of the convex reformulation.
    pub objective: f64,
    pub radius: f64,
}

/// Analytical bracket for the dual multiplier together with the residual it brackets.
#[derive(Debug, Clone)]
pub struct BisectionBracket {
    pub gamma_min: f64,
    pub gamma_max: f64,
    eigenvalues: Vec<f64>,
    rho: f64,
}

impl BisectionBracket {
    /// `φ(γ)`.
    pub fn residual(&self, gamma: f64) -> f64 {
        gamma_residual(&self.eigenvalues, self.rho, gamma)
    }

    /// `φ'(γ)`.
    pub fn slope(&self, gamma: f64) -> f64 {
        gamma_residual_slope(&self.eigenvalues, self.rho, gamma)
    }
}

/// `½(√(t² + 4t) − t)` for `t = λγ ≥ 0`.
fn half_gap(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        2.0 / (1.0 + (1.0 + 4.0 / t).sqrt())
    }
}

/// `φ(γ)` for the given eigenvalues and radius.
pub fn gamma_residual(eigenvalues: &[f64], rho: f64, gamma: f64) -> f64 {
    let p = eigenvalues.len() as f64;
    let sum: f64 = eigenvalues.iter().map(|&l| half_gap(l * gamma)).sum();
    rho * rho * gamma - p + sum
}

fn gamma_residual_slope(eigenvalues: &[f64], rho: f64, gamma: f64) -> f64 {
    let sum: f64 = eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let t = l * gamma;
            let s = (1.0 + 4.0 / t).sqrt();
            4.0 * l / ((1.0 + s) * (1.0 + s) * s * t * t)
        })
        .sum();
    rho * rho + sum
}

fn check_inputs(eigenvalues: &[f64], rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "radius must be positive and finite",
        });
    }
    if eigenvalues.is_empty() {
        return Err(Error::Empty("eigenvalues"));
    }
    if let Some(&bad) = eigenvalues.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eigenvalue",
            value: bad,
            reason: "eigenvalues must be finite and nonnegative",
        });
    }
    Ok(())
}

/// A-priori interval `[γ_min, γ_max]` containing the dual multiplier.
///
/// `γ_max = min{p/ρ², ρ⁻¹√(Σ 1/λᵢ)}`, the second term dropped when some `λᵢ = 0`;
/// `γ_min` is the positive root of `ρ²γ − p + p√(λ_max γ)`. The endpoints are then
/// validated against the sign of `φ` and widened if rounding put the root outside.
pub fn gamma_bracket(eigenvalues: &[f64], rho: f64) -> Result<BisectionBracket> {
    check_inputs(eigenvalues, rho)?;
    let p = eigenvalues.len() as f64;
    let rho2 = rho * rho;
    let lmax = eigenvalues.iter().cloned().fold(0.0, f64::max);

    let mut gamma_max = p / rho2;
    if eigenvalues.iter().all(|&l| l > 0.0) {
        let inv_sum: f64 = eigenvalues.iter().map(|l| 1.0 / l).sum();
        gamma_max = gamma_max.min(inv_sum.sqrt() / rho);
    }
    // Rationalized form of (p²λ + 2pρ² − p√(p²λ² + 4pρ²λ)) / (2ρ⁴).
    let gamma_min =
        2.0 * p / (p * lmax + 2.0 * rho2 + (p * p * lmax * lmax + 4.0 * p * rho2 * lmax).sqrt());

    let mut bracket = BisectionBracket {
        gamma_min: gamma_min.min(gamma_max),
        gamma_max,
        eigenvalues: eigenvalues.to_vec(),
        rho,
    };
    let mut tries = 0;
    while bracket.residual(bracket.gamma_min) > 0.0 {
        bracket.gamma_min *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket(
                "lower endpoint has positive residual".into(),
            ));
        }
    }
    tries = 0;
    while bracket.residual(bracket.gamma_max) < 0.0 {
        bracket.gamma_max *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket(
                "upper endpoint has negative residual".into(),
            ));
        }
    }
    Ok(bracket)
}

/// Unique positive root `γ*` of `φ`, to `|φ(γ*)| ≤ tol` (or float resolution).
pub fn solve_gamma(eigenvalues: &[f64], rho: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "tolerance must be positive",
        });
    }
    let bracket = gamma_bracket(eigenvalues, rho)?;
    increasing_root(
        |g| (bracket.residual(g), bracket.slope(g)),
        bracket.gamma_min,
        bracket.gamma_max,
        tol,
    )
}

/// Shrunk precision eigenvalue `x*` for a sample eigenvalue `λ` and multiplier `γ*`.
///
/// Returns exactly `γ*` when `λ = 0`; otherwise `0 < x* < γ*`.
pub fn eigenvalue_map(lambda: f64, gamma: f64) -> f64 {
    if lambda <= 0.0 {
        return gamma;
    }
    let t = lambda * gamma;
    let s = (1.0 + 4.0 / t).sqrt();
    let x = if t >= 1.0 {
        // γ(s − 1)/(s + 1) with s − 1 = (4/t)/(s + 1)
        4.0 / (lambda * (1.0 + s) * (1.0 + s))
    } else {
        gamma * (1.0 - 2.0 / (1.0 + s))
    };
    x.min(gamma)
}

/// `γ − x*` without cancellation, `= 2γ/(1 + √(1 + 4/(λγ)))`; zero when `λ = 0`.
pub(crate) fn dual_gap(lambda: f64, gamma: f64) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else {
        2.0 * gamma / (1.0 + (1.0 + 4.0 / (lambda * gamma)).sqrt())
    }
}

/// Spectrum of `Σ̂` after PSD validation, with eigenvalues below the rank threshold zeroed.
pub(crate) fn covariance_spectrum(cov: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let mut spec = cov.spectral()?;
    check_psd(&spec, PSD_CLAMP_TOL, "covariance")?;
    spec.eigenvalues = spec.thresholded_eigenvalues();
    Ok(spec)
}

/// The Wasserstein shrinkage estimator for a PSD sample covariance and radius `ρ > 0`.
pub fn wasserstein_shrinkage(
    cov: &SymmetricMatrix,
    rho: f64,
    tol: f64,
) -> Result<ShrinkageSolution> {
    let spec = covariance_spectrum(cov)?;
    let lambdas = spec.eigenvalues.as_slice();
    let gamma = solve_gamma(lambdas, rho, tol)?;
    let shrunk = spec.eigenvalues.map(|l| eigenvalue_map(l, gamma));
    let precision = spec.compose(&shrunk);

    // f(X̂, γ*) in the shared eigenbasis; λᵢ/(γ − xᵢ) = λᵢ(1 + sᵢ)/(2γ) vanishes at λᵢ = 0.
    let log_det: f64 = shrunk.iter().map(|x| x.ln()).sum();
    let trace: f64 = lambdas.iter().sum();
    let coupling: f64 = lambdas
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l / dual_gap(l, gamma))
        .sum();
    let objective = -log_det + gamma * (rho * rho - trace) + gamma * gamma * coupling;

    Ok(ShrinkageSolution {
        precision,
        dual_multiplier: gamma,
        shrunk_eigenvalues: shrunk,
        objective,
        radius: rho,
    })
}

/// Objective of the convex reformulation,
/// `f(X, γ) = −log det X + γ(ρ² − Tr Σ̂) + γ² ⟨(γI − X)⁻¹, Σ̂⟩`,
/// defined on `0 ≺ X ≺ γI`.
pub fn reformulation_objective(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
) -> Result<f64> {
    if cov.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            found: x.dim(),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "radius must be positive",
        });
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Infeasible("gamma must be positive"));
    }
    let chol_x = x
        .cholesky()
        .ok_or(Error::Infeasible("X is not positive definite"))?;
    let gap = x.scale(-1.0).shift_diagonal(gamma);
    let chol_gap = gap
        .cholesky()
        .ok_or(Error::Infeasible("gamma I - X is not positive definite"))?;
    let log_det: f64 = 2.0
        * chol_x
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let coupling = chol_gap.solve(cov.as_matrix()).trace();
    Ok(-log_det + gamma * (rho * rho - cov.trace()) + gamma * gamma * coupling)
}
