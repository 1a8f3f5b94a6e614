use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{psd_sqrt, SymmetricMatrix};

pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Generator stream used for the sign matrix; sampling and pattern selection use others.
const SIGN_STREAM: u64 = 0;
pub(crate) const SAMPLE_STREAM: u64 = 1;
pub(crate) const PATTERN_STREAM: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Parameters of the synthetic experiment: `Σ₀ = (CᵀC + ridge·I)⁻¹` where `C` is `p × p`
/// with `⌊d·p²⌋` random ±1 entries (at least one).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub density: f64,
    pub ridge: f64,
    pub seed: u64,
    pub samples: usize,
    pub trials: usize,
}

impl SyntheticSpec {
    pub fn new(dim: usize, density: f64, samples: usize, trials: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            dim,
            density,
            ridge: DEFAULT_RIDGE,
            seed,
            samples,
            trials,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::Config("ridge must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// `max(1, ⌊d·p²⌋)`.
    pub fn nonzero_count(&self) -> usize {
        let cells = self.dim * self.dim;
        ((self.density * cells as f64).floor() as usize).clamp(1, cells)
    }
}

/// The sign matrix `C`: nonzero cells drawn uniformly without replacement, each ±1 with
/// equal probability.
pub fn sign_matrix(spec: &SyntheticSpec) -> DMatrix<f64> {
    let p = spec.dim;
    let mut rng = stream_rng(spec.seed, SIGN_STREAM);
    let mut c = DMatrix::zeros(p, p);
    for cell in sample(&mut rng, p * p, spec.nonzero_count()).into_iter() {
        c[(cell / p, cell % p)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    c
}

/// `CᵀC + ridge·I`, the true precision matrix.
pub fn precision_from_signs(c: &DMatrix<f64>, ridge: f64) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(&(c.transpose() * c))
        .expect("finite sign matrix")
        .shift_diagonal(ridge)
}

/// `(CᵀC + ridge·I)⁻¹`, inverted in the eigenbasis.
pub fn sigma0_from_signs(c: &DMatrix<f64>, ridge: f64) -> SymmetricMatrix {
    precision_from_signs(c, ridge)
        .spectral()
        .expect("finite precision")
        .map(|l| 1.0 / l)
}

pub fn synthetic_sigma0(spec: &SyntheticSpec) -> SymmetricMatrix {
    sigma0_from_signs(&sign_matrix(spec), spec.ridge)
}

/// `n` rows of `N(0, Σ₀)`, formed as standard normal rows times `Σ₀^½`.
pub fn sample_gaussian(sigma0: &SymmetricMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let root = psd_sqrt(sigma0)?;
    let mut rng = stream_rng(seed, SAMPLE_STREAM);
    let p = sigma0.dim();
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(z * root.as_matrix())
}
