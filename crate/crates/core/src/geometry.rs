//! Gaussian models and the distances between them: the type-2 Wasserstein distance
//! (closed form for normal distributions), the metric it induces on covariance
//! matrices, and the Kullback-Leibler divergence.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{check_psd, SpectralDecomposition, SymmetricMatrix, PSD_CLAMP_TOL, RANK_TOL};

/// Negative-eigenvalue slack accepted by [`induced_metric`].
pub const METRIC_PSD_TOL: f64 = 1e-8;

/// A (possibly degenerate) normal distribution `N(μ, Σ)`.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: SymmetricMatrix,
    spectral: SpectralDecomposition,
}

impl GaussianModel {
    /// Validates `Σ ⪰ 0` up to [`PSD_CLAMP_TOL`]; slightly negative eigenvalues are clamped.
    pub fn new(mean: DVector<f64>, covariance: SymmetricMatrix) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                expected: covariance.dim(),
                found: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut spectral = covariance.spectral()?;
        check_psd(&spectral, PSD_CLAMP_TOL, "covariance")?;
        let covariance = if spectral.min_eigenvalue() < 0.0 {
            spectral.eigenvalues.apply(|l| *l = l.max(0.0));
            spectral.reconstruct()
        } else {
            covariance
        };
        Ok(Self {
            mean,
            covariance,
            spectral,
        })
    }

    pub fn centered(covariance: SymmetricMatrix) -> Result<Self> {
        let p = covariance.dim();
        Self::new(DVector::zeros(p), covariance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.covariance
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// Number of eigenvalues above the relative rank threshold.
    pub fn rank(&self) -> usize {
        let cut = RANK_TOL * self.spectral.max_eigenvalue();
        self.spectral
            .eigenvalues
            .iter()
            .filter(|&&l| l > 0.0 && l >= cut)
            .count()
    }

    pub fn is_degenerate(&self) -> bool {
        self.spectral.is_singular()
    }

    fn sqrt_cov(&self) -> SymmetricMatrix {
        self.spectral.sqrt()
    }
}

/// Type-2 Wasserstein distance between two normal distributions.
pub fn wasserstein_gaussian(p1: &GaussianModel, p2: &GaussianModel) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: p2.dim(),
        });
    }
    let shift = (p1.mean() - p2.mean()).norm_squared();
    let cov = bures_distance(&p1.sqrt_cov(), &p2.sqrt_cov());
    Ok((shift + cov * cov).sqrt())
}

/// The metric induced on the PSD cone by the Wasserstein distance at equal means.
pub fn induced_metric(s1: &SymmetricMatrix, s2: &SymmetricMatrix) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    let d1 = s1.spectral()?;
    let d2 = s2.spectral()?;
    check_psd(&d1, METRIC_PSD_TOL, "first argument")?;
    check_psd(&d2, METRIC_PSD_TOL, "second argument")?;
    let (r1, r2) = (d1.sqrt(), d2.sqrt());
    Ok(bures_distance(&r1, &r2))
}

/// `√(Tr S₁ + Tr S₂ − 2 Tr √(√S₂ S₁ √S₂))` from the square roots `r1 = √S₁`, `r2 = √S₂`.
///
/// Evaluated as `‖r1 − r2·U‖_F` with `U` the orthogonal polar factor aligning the two
/// roots, which equals the trace formula but avoids its cancellation near `S₁ = S₂`.
fn bures_distance(r1: &SymmetricMatrix, r2: &SymmetricMatrix) -> f64 {
    let cross: DMatrix<f64> = r1.as_matrix() * r2.as_matrix();
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    // cross = W D Zᵀ; the optimal rotation is Z Wᵀ.
    let rotation = (u * v_t).transpose();
    (r1.as_matrix() - r2.as_matrix() * rotation).norm()
}

/// Kullback-Leibler divergence `D(P₁ ‖ P₂)`; `+∞` when the supports differ.
///
/// When both covariances are singular with a common range (and the mean shift lies in
/// it), the divergence is evaluated on that subspace.
pub fn kl_divergence(p1: &GaussianModel, p2: &GaussianModel) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: p2.dim(),
        });
    }
    let (r1, r2) = (p1.rank(), p2.rank());
    if r1 != r2 {
        return Ok(f64::INFINITY);
    }
    let p = p1.dim();
    let shift = p2.mean() - p1.mean();
    if r1 == p {
        let inv2 = p2.spectral.map(|l| 1.0 / l);
        let logdet1: f64 = p1.spectral.eigenvalues.iter().map(|l| l.ln()).sum();
        let logdet2: f64 = p2.spectral.eigenvalues.iter().map(|l| l.ln()).sum();
        let quad = shift.dot(&(inv2.as_matrix() * &shift));
        let tr = p1.covariance.inner(&inv2);
        return Ok((0.5 * (quad + tr - p as f64 - logdet1 + logdet2)).max(0.0));
    }
    if r1 == 0 {
        return Ok(if shift.norm() <= 1e-12 * p1.mean().norm().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        });
    }
    // Range basis of Σ₂: eigenvectors of the top r eigenvalues.
    let basis = p2.spectral.eigenvectors.columns(p - r2, r2).into_owned();
    let proj2 = &basis * basis.transpose();
    let basis1 = p1.spectral.eigenvectors.columns(p - r1, r1).into_owned();
    let proj1 = &basis1 * basis1.transpose();
    if (&proj1 - &proj2).norm() > 1e-8 {
        return Ok(f64::INFINITY);
    }
    let off_range = &shift - &proj2 * &shift;
    if off_range.norm() > 1e-8 * shift.norm().max(1.0) {
        return Ok(f64::INFINITY);
    }
    let restrict = |m: &SymmetricMatrix| {
        SymmetricMatrix::symmetrize(&(basis.transpose() * m.as_matrix() * &basis))
    };
    let sub1 = GaussianModel::new(basis.transpose() * p1.mean(), restrict(&p1.covariance)?)?;
    let sub2 = GaussianModel::new(basis.transpose() * p2.mean(), restrict(&p2.covariance)?)?;
    kl_divergence(&sub1, &sub2)
}
