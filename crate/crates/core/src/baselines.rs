//! Sample moments, the estimators compared in the experiments, and Stein's loss.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{SymmetricMatrix, RANK_TOL};
use crate::shrinkage::{wasserstein_shrinkage, DEFAULT_GAMMA_TOL};
use crate::sqa::{sqa_solve, SolverConfig, SparsityPattern};

/// Normalization of the scatter matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divisor {
    /// `n`, the maximum likelihood estimate.
    N,
    /// `n − 1`.
    NMinusOne,
    /// `n − k`, e.g. the number of classes for a pooled within-class covariance.
    NMinus(usize),
    Fixed(f64),
}

impl Divisor {
    pub fn resolve(self, n: usize) -> Result<f64> {
        let d = match self {
            Divisor::N => n as f64,
            Divisor::NMinusOne => n as f64 - 1.0,
            Divisor::NMinus(k) => n as f64 - k as f64,
            Divisor::Fixed(d) => d,
        };
        if !(d >= 1.0) || !d.is_finite() {
            return Err(Error::InvalidParameter {
                name: "divisor",
                value: d,
                reason: "must be at least 1",
            });
        }
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct SampleMoments {
    pub mean: DVector<f64>,
    pub covariance: SymmetricMatrix,
    pub sample_count: usize,
    pub divisor: f64,
}

impl SampleMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Moments with the covariance replaced, e.g. by a rescaled or pooled one.
    pub fn with_covariance(&self, covariance: SymmetricMatrix) -> Self {
        Self {
            covariance,
            ..self.clone()
        }
    }
}

fn check_data(data: &DMatrix<f64>) -> Result<()> {
    if data.nrows() == 0 {
        return Err(Error::Empty("data has no rows"));
    }
    if data.ncols() == 0 {
        return Err(Error::Empty("data has no columns"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Sample mean and `scatter / divisor` for rows of `data` (observations × variables).
pub fn sample_moments(data: &DMatrix<f64>, divisor: f64) -> Result<SampleMoments> {
    check_data(data)?;
    let d = Divisor::Fixed(divisor).resolve(data.nrows())?;
    let n = data.nrows();
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scatter = centered.transpose() * &centered;
    Ok(SampleMoments {
        mean,
        covariance: SymmetricMatrix::symmetrize(&(scatter / d))?,
        sample_count: n,
        divisor: d,
    })
}

/// `sample_moments` on a subset of rows.
pub fn sample_moments_of_rows(
    data: &DMatrix<f64>,
    rows: &[usize],
    divisor: Divisor,
) -> Result<SampleMoments> {
    let sub = data.select_rows(rows);
    let d = divisor.resolve(rows.len())?;
    sample_moments(&sub, d)
}

/// `[(1 − α)Σ̂ + α diag(Σ̂)]⁻¹`.
pub fn linear_shrinkage(moments: &SampleMoments, alpha: f64) -> Result<SymmetricMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "mixing parameter must lie in [0, 1]",
        });
    }
    let cov = moments.covariance.as_matrix();
    let mut blend = cov * (1.0 - alpha);
    for i in 0..cov.nrows() {
        blend[(i, i)] = cov[(i, i)];
    }
    let spec = SymmetricMatrix::new(blend)?.spectral()?;
    if !(spec.max_eigenvalue() > 0.0) || spec.min_eigenvalue() <= RANK_TOL * spec.max_eigenvalue() {
        return Err(Error::Singular("shrinkage blend"));
    }
    Ok(spec.map(|l| 1.0 / l))
}

/// Stein's loss `−log det(X̂Σ) + ⟨X̂, Σ⟩ − p`, evaluated as `Σ (μᵢ − 1 − log μᵢ)` over the
/// eigenvalues `μᵢ` of `LᵀX̂L`, where `Σ = LLᵀ`, so every term is nonnegative.
pub fn stein_loss(x_hat: &SymmetricMatrix, sigma_ref: &SymmetricMatrix) -> Result<f64> {
    if x_hat.dim() != sigma_ref.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma_ref.dim(),
            found: x_hat.dim(),
        });
    }
    let chol = sigma_ref
        .cholesky()
        .ok_or(Error::Singular("reference covariance"))?;
    let l = chol.l();
    let inner = SymmetricMatrix::symmetrize(&(l.transpose() * x_hat.as_matrix() * &l))?;
    let spec = inner.spectral()?;
    if !(spec.min_eigenvalue() > 0.0) {
        return Err(Error::Singular("precision estimate"));
    }
    Ok(spec
        .eigenvalues
        .iter()
        .map(|&mu| {
            let t = mu - 1.0;
            t - t.ln_1p()
        })
        .sum())
}

/// A precision estimator indexed by a scalar tuning parameter.
pub trait PrecisionEstimator: Sync {
    fn estimate(&self, moments: &SampleMoments, param: f64) -> Result<SymmetricMatrix>;
}

impl<F> PrecisionEstimator for F
where
    F: Fn(&SampleMoments, f64) -> Result<SymmetricMatrix> + Sync,
{
    fn estimate(&self, moments: &SampleMoments, param: f64) -> Result<SymmetricMatrix> {
        self(moments, param)
    }
}

/// The Wasserstein shrinkage estimator with radius as parameter; analytical without a
/// pattern, iterative with one.
#[derive(Debug, Clone, Default)]
pub struct WassersteinEstimator {
    pub pattern: Option<SparsityPattern>,
    pub solver: SolverConfig,
}

impl WassersteinEstimator {
    pub fn with_pattern(pattern: SparsityPattern) -> Self {
        Self {
            pattern: Some(pattern),
            solver: SolverConfig::default(),
        }
    }
}

impl PrecisionEstimator for WassersteinEstimator {
    fn estimate(&self, moments: &SampleMoments, rho: f64) -> Result<SymmetricMatrix> {
        match &self.pattern {
            Some(pattern) if !pattern.is_empty() => {
                Ok(sqa_solve(&moments.covariance, rho, pattern, &self.solver)?
                    .0
                    .precision)
            }
            _ => Ok(wasserstein_shrinkage(&moments.covariance, rho, DEFAULT_GAMMA_TOL)?.precision),
        }
    }
}

/// Linear shrinkage toward the diagonal with the mixing weight as parameter.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearShrinkageEstimator;

impl PrecisionEstimator for LinearShrinkageEstimator {
    fn estimate(&self, moments: &SampleMoments, alpha: f64) -> Result<SymmetricMatrix> {
        linear_shrinkage(moments, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_moments() {
        let data = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let m = sample_moments(&data, 2.0).unwrap();
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn identical_rows_and_divisor_scaling() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(
            sample_moments(&data, 3.0).unwrap().covariance.max_abs(),
            0.0
        );

        let data = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 1.0, 0.0, -2.0]);
        let biased = sample_moments(&data, 4.0).unwrap().covariance;
        let unbiased = sample_moments(&data, 3.0).unwrap().covariance;
        assert!((biased.as_matrix() * (4.0 / 3.0) - unbiased.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn moments_reject_bad_input() {
        assert!(sample_moments(&DMatrix::zeros(0, 2), 1.0).is_err());
        assert!(sample_moments(&DMatrix::from_element(2, 2, f64::NAN), 1.0).is_err());
        assert!(sample_moments(&DMatrix::zeros(2, 2), 0.5).is_err());
        assert_eq!(Divisor::NMinus(2).resolve(5).unwrap(), 3.0);
        assert!(Divisor::NMinusOne.resolve(1).is_err());
    }

    #[test]
    fn linear_shrinkage_endpoints() {
        let cov = SymmetricMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let m = SampleMoments {
            mean: DVector::zeros(2),
            covariance: cov.clone(),
            sample_count: 10,
            divisor: 10.0,
        };
        let full = linear_shrinkage(&m, 1.0).unwrap();
        assert!(
            (full.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]))).amax()
                < 1e-15
        );
        let none = linear_shrinkage(&m, 0.0).unwrap();
        assert!((none.as_matrix() - cov.inverse_pd().unwrap().as_matrix()).amax() < 1e-12);

        let diag = m.with_covariance(SymmetricMatrix::from_diagonal(&[2.0, 4.0]).unwrap());
        let a = linear_shrinkage(&diag, 0.1).unwrap();
        let b = linear_shrinkage(&diag, 0.9).unwrap();
        assert!((a.as_matrix() - b.as_matrix()).amax() < 1e-15);

        let rank_one =
            m.with_covariance(SymmetricMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap());
        assert!(matches!(
            linear_shrinkage(&rank_one, 0.0),
            Err(Error::Singular(_))
        ));
        assert!(linear_shrinkage(&rank_one, 0.5).is_ok());
        assert!(linear_shrinkage(&m, 1.5).is_err());
    }

    #[test]
    fn stein_loss_values() {
        let one = SymmetricMatrix::identity(1);
        let two = SymmetricMatrix::from_diagonal(&[2.0]).unwrap();
        assert!((stein_loss(&two, &one).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        let cov = SymmetricMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        assert!(stein_loss(&cov.inverse_pd().unwrap(), &cov).unwrap() < 1e-14);
        assert!(stein_loss(&SymmetricMatrix::zeros(2), &cov).is_err());
    }
}
