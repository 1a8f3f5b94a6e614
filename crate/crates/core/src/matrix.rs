//! Symmetric matrix storage and its spectral factorization.

use std::ops::Index;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Slack (relative to `max(1, |λ|max)`) allowed for negative eigenvalues before a
/// matrix is rejected as not positive semidefinite.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

/// A finite, square, exactly symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Builds a symmetric matrix from `m`, treating its upper triangle as authoritative.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let p = m.nrows();
        for j in 0..p {
            for i in 0..=j {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite);
                }
            }
        }
        for j in 0..p {
            for i in (j + 1)..p {
                m[(i, j)] = m[(j, i)];
            }
        }
        Ok(Self(m))
    }

    /// Builds a symmetric matrix as `(m + mᵀ)/2`.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        let s = (m + m.transpose()) * 0.5;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Self::new(s)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty("diagonal"));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds a matrix from row-major nested slices; the upper triangle wins.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::NotSquare {
                rows: p,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius inner product `⟨A, B⟩ = Tr(AᵀB)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// `self + factor * I`.
    pub fn shift_diagonal(&self, factor: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += factor;
        }
        Self(m)
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        spectral_decompose(self)
    }

    /// Cholesky factor, or `None` when the matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.0.clone().cholesky()
    }

    /// `log det` via Cholesky; errors if the matrix is not positive definite.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.cholesky().ok_or(Error::Singular("matrix"))?;
        Ok(2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>())
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<Self> {
        let chol = self.cholesky().ok_or(Error::Singular("matrix"))?;
        Self::symmetrize(&chol.inverse())
    }
}

impl Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl TryFrom<DMatrix<f64>> for SymmetricMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Largest eigenvalue magnitude, floored at one; the scale used by relative tolerances.
    pub fn scale(&self) -> f64 {
        self.eigenvalues.amax().max(1.0)
    }

    /// True when `λ_min < RANK_TOL · λ_max`.
    pub fn is_singular(&self) -> bool {
        let max = self.max_eigenvalue();
        max <= 0.0 || self.min_eigenvalue() < RANK_TOL * max
    }

    /// Eigenvalues with entries below `RANK_TOL · λ_max` (including negatives) set to zero.
    pub fn thresholded_eigenvalues(&self) -> DVector<f64> {
        let cut = RANK_TOL * self.max_eigenvalue().max(0.0);
        self.eigenvalues
            .map(|l| if l < cut || l <= 0.0 { 0.0 } else { l })
    }

    /// `V diag(values) Vᵀ` in this eigenbasis.
    pub fn compose(&self, values: &DVector<f64>) -> SymmetricMatrix {
        let v = &self.eigenvectors;
        let scaled = v * DMatrix::from_diagonal(values);
        let m = scaled * v.transpose();
        SymmetricMatrix((&m + m.transpose()) * 0.5)
    }

    /// Applies `f` to every eigenvalue and recomposes.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        self.compose(&self.eigenvalues.map(f))
    }

    /// Square root with the rank threshold applied, so rounding noise in null
    /// directions does not leak in at the scale of its square root.
    pub fn sqrt(&self) -> SymmetricMatrix {
        self.compose(&self.thresholded_eigenvalues().map(f64::sqrt))
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.compose(&self.eigenvalues)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues and a deterministic sign
/// convention: the largest-magnitude component of each eigenvector is positive.
pub fn spectral_decompose(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let p = m.dim();
    let eig = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Rejects matrices whose smallest eigenvalue is below `-tol · max(1, |λ|max)`.
pub(crate) fn check_psd(spec: &SpectralDecomposition, tol: f64, what: &'static str) -> Result<()> {
    let min = spec.min_eigenvalue();
    if min < -tol * spec.scale() {
        return Err(Error::NotPsd {
            what,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Principal square root of a PSD matrix. Eigenvalues below the rank threshold
/// (including slightly negative ones) are taken as zero.
pub fn psd_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let spec = m.spectral()?;
    check_psd(&spec, PSD_CLAMP_TOL, "matrix")?;
    Ok(spec.sqrt())
}
