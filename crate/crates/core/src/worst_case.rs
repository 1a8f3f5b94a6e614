//! Least-favorable Gaussian distributions for a fixed precision estimate.
//!
//! For `Σ̂ ≻ 0` and `X ≻ 0` the worst case of `E[ξᵀXξ]` over the Wasserstein ball of
//! radius `ρ` around `N(0, Σ̂)` is attained by `N(0, S*)` with
//!
//! ```text
//! S* = γ² (γI − X)⁻¹ Σ̂ (γI − X)⁻¹
//! ```
//!
//! where `γ > λ_max(X)` solves `ρ² = Σᵢ Σ̃ᵢᵢ dᵢ² / (γ − dᵢ)²` in the eigenbasis
//! `X = Q diag(d) Qᵀ`, `Σ̃ = QᵀΣ̂Q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::induced_metric;
use crate::matrix::{SpectralDecomposition, SymmetricMatrix};
use crate::roots::increasing_root;
use crate::shrinkage::{covariance_spectrum, eigenvalue_map, solve_gamma, DEFAULT_GAMMA_TOL};

/// Relative offset of the lower bracket endpoint above `λ_max(X)`.
const LOWER_OFFSET: f64 = 1e-8;

/// The extremal distribution `N(0, S*)` together with its certificates.
#[derive(Debug, Clone)]
pub struct WorstCaseDistribution {
    pub covariance: SymmetricMatrix,
    pub multiplier: f64,
    /// `V(S*, Σ̂)`, which equals `ρ` at the true multiplier.
    pub attained_distance: f64,
    /// `⟨S*, X⟩`.
    pub attained_value: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "radius must be positive and finite",
        });
    }
    Ok(())
}

/// `Σ̂` and `X` expressed in the eigenbasis of `X`.
struct Frame {
    spec: SpectralDecomposition,
    cov_diag: DVector<f64>,
    cov_eig: DMatrix<f64>,
}

impl Frame {
    fn new(cov: &SymmetricMatrix, x: &SymmetricMatrix) -> Result<Self> {
        if cov.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: x.dim(),
            });
        }
        let spec = x.spectral()?;
        let q = &spec.eigenvectors;
        let cov_eig = q.transpose() * cov.as_matrix() * q;
        let cov_eig = (&cov_eig + cov_eig.transpose()) * 0.5;
        let cov_diag = cov_eig.diagonal();
        Ok(Self {
            spec,
            cov_diag,
            cov_eig,
        })
    }

    fn gaps(&self, gamma: f64) -> DVector<f64> {
        self.spec.eigenvalues.map(|d| gamma - d)
    }

    /// `ρ² − Σ Σ̃ᵢᵢ dᵢ²/(γ − dᵢ)²` and its derivative in `γ`.
    fn residual(&self, rho: f64, gamma: f64) -> (f64, f64) {
        let mut value = rho * rho;
        let mut slope = 0.0;
        for (i, &d) in self.spec.eigenvalues.iter().enumerate() {
            let r = d / (gamma - d);
            value -= self.cov_diag[i] * r * r;
            slope += 2.0 * self.cov_diag[i] * r * r / (gamma - d);
        }
        (value, slope)
    }
}

/// Multiplier of the worst-case problem: the unique `γ > λ_max(X)` solving the
/// first-order condition, to an absolute residual of `10⁻¹³·max(1, ρ²)` or float
/// resolution.
pub fn extremal_gamma(cov: &SymmetricMatrix, x: &SymmetricMatrix, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let frame = Frame::new(cov, x)?;
    let cov_spec = cov.spectral()?;
    if cov_spec.is_singular() || cov_spec.min_eigenvalue() <= 0.0 {
        return Err(Error::Singular("covariance"));
    }
    if !(frame.spec.min_eigenvalue() > 0.0) {
        return Err(Error::Singular("X"));
    }
    let top = frame.spec.max_eigenvalue();
    let f = |g: f64| frame.residual(rho, g);

    let mut lo = top * (1.0 + LOWER_OFFSET) + 1e-12;
    let mut tries = 0;
    while f(lo).0 > 0.0 {
        lo = top + 0.5 * (lo - top);
        tries += 1;
        if tries > 200 || lo <= top {
            return Err(Error::Bracket(
                "no negative residual above the spectrum of X".into(),
            ));
        }
    }
    let mut hi = top + 1.0;
    tries = 0;
    while f(hi).0 < 0.0 {
        hi = top + 2.0 * (hi - top);
        tries += 1;
        if tries > 2000 {
            return Err(Error::Bracket("residual stays negative".into()));
        }
    }
    let tol = 1e-13 * (rho * rho).max(1.0);
    increasing_root(f, lo, hi, tol)
}

/// `γ(ρ² − Tr Σ̂) + γ²⟨(γI − X)⁻¹, Σ̂⟩`, the dual bound on the worst-case value.
pub fn worst_case_bound(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
) -> Result<f64> {
    let frame = Frame::new(cov, x)?;
    let gaps = frame.gaps(gamma);
    if gaps.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Infeasible("gamma I - X is not positive definite"));
    }
    // γ²/(γ − d) = γ + d + d²/(γ − d).
    let mut value = gamma * rho * rho;
    for (i, &d) in frame.spec.eigenvalues.iter().enumerate() {
        value += frame.cov_diag[i] * (d + d * d / gaps[i]);
    }
    Ok(value)
}

/// `S* = γ²(γI − X)⁻¹Σ̂(γI − X)⁻¹` and its distance and value certificates.
pub fn extremal_covariance(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
) -> Result<WorstCaseDistribution> {
    let frame = Frame::new(cov, x)?;
    let gaps = frame.gaps(gamma);
    if gaps.iter().any(|g| !(*g > 0.0)) || !gamma.is_finite() {
        return Err(Error::Infeasible("gamma I - X is not positive definite"));
    }
    let p = gaps.len();
    let w = gaps.map(|g| gamma / g);
    let s_eig = DMatrix::from_fn(p, p, |i, j| w[i] * frame.cov_eig[(i, j)] * w[j]);
    let q = &frame.spec.eigenvectors;
    let covariance = SymmetricMatrix::symmetrize(&(q * s_eig * q.transpose()))?;
    finish(covariance, gamma, cov, x)
}

fn finish(
    covariance: SymmetricMatrix,
    multiplier: f64,
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
) -> Result<WorstCaseDistribution> {
    let attained_distance = induced_metric(&covariance, cov)?;
    let attained_value = covariance.inner(x);
    Ok(WorstCaseDistribution {
        covariance,
        multiplier,
        attained_distance,
        attained_value,
    })
}

/// Worst case at the robust estimate itself. Works for singular `Σ̂`: eigendirections
/// with `λᵢ = 0` receive variance `1/γ*`, the others `λᵢ(1 + sᵢ)²/4` with
/// `sᵢ = √(1 + 4/(λᵢγ*))`.
pub fn extremal_for_optimal(cov: &SymmetricMatrix, rho: f64) -> Result<WorstCaseDistribution> {
    check_rho(rho)?;
    let spec = covariance_spectrum(cov)?;
    let gamma = solve_gamma(spec.eigenvalues.as_slice(), rho, DEFAULT_GAMMA_TOL)?;
    let variances = spec.eigenvalues.map(|l| {
        if l > 0.0 {
            let s = (1.0 + 4.0 / (l * gamma)).sqrt();
            0.25 * l * (1.0 + s) * (1.0 + s)
        } else {
            1.0 / gamma
        }
    });
    let precision = spec.compose(&spec.eigenvalues.map(|l| eigenvalue_map(l, gamma)));
    let covariance = spec.compose(&variances);
    finish(covariance, gamma, cov, &precision)
}

/// True when `|V(S*, Σ̂) − ρ| ≤ tol`.
pub fn radius_attained(dist: &WorstCaseDistribution, rho: f64, tol: f64) -> bool {
    (dist.attained_distance - rho).abs() <= tol
}
