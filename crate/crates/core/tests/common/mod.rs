#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wass_shrink::sqa::SparsityPattern;
use wass_shrink::SymmetricMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sym(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(&DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)))
        .unwrap()
}

/// Wishart-like positive definite matrix with a few extra degrees of freedom.
pub fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let a = DMatrix::from_fn(p, p + 3, |_, _| rng.random_range(-1.0..1.0));
    SymmetricMatrix::symmetrize(&(&a * a.transpose() / (p as f64))).unwrap()
}

pub fn random_rotation(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    if q.determinant() < 0.0 {
        let mut q = q;
        q.column_mut(0).neg_mut();
        q
    } else {
        q
    }
}

pub fn conjugate(r: &DMatrix<f64>, s: &SymmetricMatrix) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(&(r * s.as_matrix() * r.transpose())).unwrap()
}

/// Random feasible point `0 ≺ X ≺ γI`.
pub fn feasible_point(p: usize, rng: &mut ChaCha8Rng) -> (SymmetricMatrix, f64) {
    let x = random_pd(p, rng).shift_diagonal(0.2);
    let top = x.spectral().unwrap().max_eigenvalue();
    (x, top + rng.random_range(0.2..2.0))
}

pub fn random_pattern(p: usize, fraction: f64, rng: &mut ChaCha8Rng) -> SparsityPattern {
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|_| rng.random_bool(fraction))
        .collect();
    SparsityPattern::new(p, pairs).unwrap()
}

pub fn max_abs_diff(a: &SymmetricMatrix, b: &SymmetricMatrix) -> f64 {
    (a.as_matrix() - b.as_matrix()).amax()
}

pub fn log_space(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 10f64.powf(from + (to - from) * k as f64 / (n - 1) as f64))
        .collect()
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// The full `(p² + 1)`-dimensional gradient and Hessian, assembled from Kronecker
/// products, together with an orthonormal basis (as columns) of the feasible
/// direction space.
pub struct DenseSystem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub basis: DMatrix<f64>,
}

pub fn dense_system(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
    pattern: &SparsityPattern,
) -> DenseSystem {
    let p = x.dim();
    let n = p * p;
    let s = cov.as_matrix();
    let xm = x.as_matrix();
    let id = DMatrix::<f64>::identity(p, p);
    let g_inv = (&id - xm / gamma).try_inverse().unwrap();
    let x_inv = xm.clone().try_inverse().unwrap();
    let gsg = &g_inv * s * &g_inv;

    let mut hessian = DMatrix::zeros(n + 1, n + 1);
    let block = x_inv.kronecker(&x_inv) + gsg.kronecker(&g_inv) * (2.0 / gamma);
    hessian.view_mut((0, 0), (n, n)).copy_from(&block);
    let cross = &g_inv * (xm * &g_inv * s + s * &g_inv * xm) * &g_inv * (-1.0 / (gamma * gamma));
    let cross = vec_of(&cross);
    hessian.view_mut((0, n), (n, 1)).copy_from(&cross);
    hessian
        .view_mut((n, 0), (1, n))
        .copy_from(&cross.transpose());
    hessian[(n, n)] = 2.0 / gamma.powi(3) * (&g_inv * xm * &g_inv * s * &g_inv * xm).trace();

    let mut gradient = DVector::zeros(n + 1);
    gradient.rows_mut(0, n).copy_from(&vec_of(&(&gsg - &x_inv)));
    gradient[n] = rho * rho + (&g_inv * s * (&id - &g_inv * xm / gamma) - s).trace();

    let mut cols = Vec::new();
    for j in 0..p {
        for i in 0..=j {
            if pattern.contains(i, j) {
                continue;
            }
            let mut v = DVector::zeros(n + 1);
            if i == j {
                v[j * p + i] = 1.0;
            } else {
                v[j * p + i] = std::f64::consts::FRAC_1_SQRT_2;
                v[i * p + j] = std::f64::consts::FRAC_1_SQRT_2;
            }
            cols.push(v);
        }
    }
    let mut v = DVector::zeros(n + 1);
    v[n] = 1.0;
    cols.push(v);
    DenseSystem {
        hessian,
        gradient,
        basis: DMatrix::from_columns(&cols),
    }
}

impl DenseSystem {
    /// Solves the reduced system `Uᵀ H U y = −Uᵀ g` and returns `U y`.
    pub fn newton_step(&self) -> DVector<f64> {
        let u = &self.basis;
        let reduced = u.transpose() * &self.hessian * u;
        let rhs = -(u.transpose() * &self.gradient);
        u * reduced.cholesky().unwrap().solve(&rhs)
    }

    /// `‖Uᵀ(Hz + g)‖ / ‖Uᵀg‖`.
    pub fn relative_residual(&self, z: &DVector<f64>) -> f64 {
        let u = &self.basis;
        (u.transpose() * (&self.hessian * z + &self.gradient)).norm()
            / (u.transpose() * &self.gradient).norm()
    }
}

pub fn stack(m: &SymmetricMatrix, g: f64) -> DVector<f64> {
    let n = m.dim() * m.dim();
    let mut v = DVector::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&vec_of(m.as_matrix()));
    v[n] = g;
    v
}

/// A covariance within Wasserstein distance `fraction·ρ` of `cov`: `S = AΣ̂A` with
/// `A = I + τB` for a random symmetric `B`. The map `ξ ↦ Aξ` couples the two
/// distributions at cost `‖(A − I)Σ̂^½‖_F`, which `τ` sets to `fraction·ρ`.
pub fn feasible_perturbation(
    cov: &SymmetricMatrix,
    rho: f64,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> SymmetricMatrix {
    let p = cov.dim();
    let b = random_sym(p, rng);
    let root = wass_shrink::matrix::psd_sqrt(cov).unwrap();
    let cost = (b.as_matrix() * root.as_matrix()).norm();
    let tau = fraction * rho / cost;
    let a = DMatrix::<f64>::identity(p, p) + b.as_matrix() * tau;
    SymmetricMatrix::symmetrize(&(&a * cov.as_matrix() * &a)).unwrap()
}
