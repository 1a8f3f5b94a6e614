//! First and second derivatives of
//! `f(X, γ) = −log det X + γ(ρ² − Tr Σ̂) + γ² ⟨(γI − X)⁻¹, Σ̂⟩`.
//!
//! Everything is evaluated in the eigenbasis of `X`, where `X = diag(d)` and
//! `M = (γI − X)⁻¹ = diag(m)` with `mᵢ = 1/(γ − dᵢ)`. Writing `Σ̃ = QᵀΣ̂Q` and
//! `Ŝ = M Σ̃ M`:
//!
//! ```text
//! ∇_X f      = γ² Ŝ − X⁻¹
//! ∂_γ f      = ρ² − Σᵢ Σ̃ᵢᵢ dᵢ² mᵢ²
//! H_XX[Δ]    = X⁻¹ Δ X⁻¹ + γ² (M Δ Ŝ + Ŝ Δ M)
//! H_Xγ       = −γ (K Σ̃ M + M Σ̃ K),  K = X M²
//! H_γγ       = 2 Σᵢ Σ̃ᵢᵢ dᵢ² mᵢ³
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Second-order expansion of the objective at a strictly feasible point.
#[derive(Debug, Clone)]
pub(crate) struct Expansion {
    q: DMatrix<f64>,
    d: DVector<f64>,
    m: DVector<f64>,
    gamma: f64,
    cov_eig: DMatrix<f64>,
    s_hat: DMatrix<f64>,
    cross_eig: DMatrix<f64>,
    h_gg: f64,
    cov_trace_terms: f64,
    log_det: f64,
}

impl Expansion {
    pub(crate) fn new(cov: &SymmetricMatrix, x: &SymmetricMatrix, gamma: f64) -> Result<Self> {
        if cov.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: x.dim(),
            });
        }
        let spec = x.spectral()?;
        if !(spec.min_eigenvalue() > 0.0) {
            return Err(Error::Infeasible("X is not positive definite"));
        }
        if !(gamma.is_finite() && gamma - spec.max_eigenvalue() > 0.0) {
            return Err(Error::Infeasible("gamma I - X is not positive definite"));
        }
        let q = spec.eigenvectors;
        let d = spec.eigenvalues;
        let m = d.map(|di| 1.0 / (gamma - di));
        let cov_eig = q.transpose() * cov.as_matrix() * &q;
        let cov_eig = (&cov_eig + cov_eig.transpose()) * 0.5;
        let p = d.len();
        let s_hat = DMatrix::from_fn(p, p, |i, j| m[i] * cov_eig[(i, j)] * m[j]);
        let k = d.component_mul(&m).component_mul(&m);
        let cross_eig = DMatrix::from_fn(p, p, |i, j| {
            -gamma * cov_eig[(i, j)] * (k[i] * m[j] + m[i] * k[j])
        });
        let mut h_gg = 0.0;
        let mut cov_trace_terms = 0.0;
        for i in 0..p {
            let c = cov_eig[(i, i)];
            h_gg += 2.0 * c * d[i] * d[i] * m[i] * m[i] * m[i];
            cov_trace_terms += c * (d[i] + d[i] * d[i] * m[i]);
        }
        let log_det = d.iter().map(|v| v.ln()).sum();
        Ok(Self {
            q,
            d,
            m,
            gamma,
            cov_eig,
            s_hat,
            cross_eig,
            h_gg,
            cov_trace_terms,
            log_det,
        })
    }

    fn to_eig(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.q.transpose() * a * &self.q
    }

    fn out_of_eigenbasis(&self, a: &DMatrix<f64>) -> SymmetricMatrix {
        let m = &self.q * a * self.q.transpose();
        SymmetricMatrix::symmetrize(&m).expect("finite derivative")
    }

    /// `f(X, γ)`, using `γ²/(γ − d) = γ + d + d²/(γ − d)` so that no term cancels.
    pub(crate) fn objective(&self, rho: f64) -> f64 {
        -self.log_det + self.gamma * rho * rho + self.cov_trace_terms
    }

    pub(crate) fn gradient(&self, rho: f64) -> (SymmetricMatrix, f64) {
        let p = self.d.len();
        let g2 = self.gamma * self.gamma;
        let mut gx = &self.s_hat * g2;
        for i in 0..p {
            gx[(i, i)] -= 1.0 / self.d[i];
        }
        let mut gg = rho * rho;
        for i in 0..p {
            let dm = self.d[i] * self.m[i];
            gg -= self.cov_eig[(i, i)] * dm * dm;
        }
        (self.out_of_eigenbasis(&gx), gg)
    }

    pub(crate) fn hessian_apply(&self, dx: &SymmetricMatrix, dg: f64) -> (SymmetricMatrix, f64) {
        let p = self.d.len();
        let de = self.to_eig(dx.as_matrix());
        let mut t = &de * &self.s_hat;
        for i in 0..p {
            t.row_mut(i).scale_mut(self.m[i]);
        }
        let g2 = self.gamma * self.gamma;
        let mut out = (&t + t.transpose()) * g2;
        for j in 0..p {
            for i in 0..p {
                out[(i, j)] += de[(i, j)] / (self.d[i] * self.d[j]) + dg * self.cross_eig[(i, j)];
            }
        }
        let og = self.cross_eig.dot(&de) + self.h_gg * dg;
        (self.out_of_eigenbasis(&out), og)
    }

    /// Inverse of the Hessian's matrix block with `Σ̃` replaced by its diagonal, and the
    /// reciprocal of the scalar block. Exact for the matrix block whenever `Σ̂` and `X`
    /// commute; used as a preconditioner.
    pub(crate) fn approximate_inverse(
        &self,
        rx: &SymmetricMatrix,
        rg: f64,
    ) -> (SymmetricMatrix, f64) {
        let p = self.d.len();
        let g2 = self.gamma * self.gamma;
        let mut e = self.to_eig(rx.as_matrix());
        for j in 0..p {
            for i in 0..p {
                let c = 1.0 / (self.d[i] * self.d[j])
                    + g2 * (self.m[i] * self.s_hat[(j, j)] + self.s_hat[(i, i)] * self.m[j]);
                e[(i, j)] /= c;
            }
        }
        let og = if self.h_gg > 0.0 { rg / self.h_gg } else { rg };
        (self.out_of_eigenbasis(&e), og)
    }
}

/// Gradient of the objective at a strictly feasible `(X, γ)`, as a matrix part and a
/// scalar part.
pub fn sqa_gradient(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
) -> Result<(SymmetricMatrix, f64)> {
    Ok(Expansion::new(cov, x, gamma)?.gradient(rho))
}

/// Hessian of the objective at `(X, γ)` applied to the direction `(ΔX, Δγ)`.
pub fn sqa_hessian_apply(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    direction: (&SymmetricMatrix, f64),
) -> Result<(SymmetricMatrix, f64)> {
    if direction.0.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: direction.0.dim(),
        });
    }
    Ok(Expansion::new(cov, x, gamma)?.hessian_apply(direction.0, direction.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::{reformulation_objective, wasserstein_shrinkage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        SymmetricMatrix::symmetrize(&DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap()
    }

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let a = DMatrix::from_fn(p, p + 2, |_, _| rng.random_range(-1.0..1.0));
        SymmetricMatrix::symmetrize(&(&a * a.transpose() / (p as f64))).unwrap()
    }

    #[test]
    fn objective_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let cov = random_pd(4, &mut rng);
            let x = random_pd(4, &mut rng);
            let gamma = x.spectral().unwrap().max_eigenvalue() + rng.random_range(0.1..2.0);
            let e = Expansion::new(&cov, &x, gamma).unwrap();
            let direct = reformulation_objective(&cov, &x, gamma, 0.7).unwrap();
            assert!((e.objective(0.7) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn zero_covariance_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_pd(3, &mut rng);
        let gamma = x.spectral().unwrap().max_eigenvalue() + 1.0;
        let zero = SymmetricMatrix::zeros(3);
        let (gx, gg) = sqa_gradient(&zero, &x, gamma, 0.5).unwrap();
        let inv = x.inverse_pd().unwrap();
        assert!((gx.as_matrix() + inv.as_matrix()).amax() < 1e-10);
        assert!((gg - 0.25).abs() < 1e-15);

        let dir = random_sym(3, &mut rng);
        let (hx, hg) = sqa_hessian_apply(&zero, &x, gamma, (&dir, 0.8)).unwrap();
        let expect = inv.as_matrix() * dir.as_matrix() * inv.as_matrix();
        assert!((hx.as_matrix() - expect).amax() < 1e-9);
        assert!(hg.abs() < 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_analytical_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cov = random_pd(5, &mut rng);
        let sol = wasserstein_shrinkage(&cov, 0.5, 1e-14).unwrap();
        let (gx, gg) = sqa_gradient(&cov, &sol.precision, sol.dual_multiplier, 0.5).unwrap();
        let scale = sol.precision.max_abs().max(1.0);
        assert!((gx.frobenius_norm().powi(2) + gg * gg).sqrt() <= 1e-6 * scale);
    }

    #[test]
    fn zero_direction_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cov = random_pd(4, &mut rng);
        let x = random_pd(4, &mut rng);
        let gamma = x.spectral().unwrap().max_eigenvalue() + 0.5;
        let e = Expansion::new(&cov, &x, gamma).unwrap();
        let (hx, hg) = e.hessian_apply(&SymmetricMatrix::zeros(4), 0.0);
        assert_eq!((hx.max_abs(), hg), (0.0, 0.0));

        let a = random_sym(4, &mut rng);
        let b = random_sym(4, &mut rng);
        let (ha, hga) = e.hessian_apply(&a, 0.3);
        let (hb, hgb) = e.hessian_apply(&b, -1.1);
        let sum = SymmetricMatrix::new(a.as_matrix() * 2.0 + b.as_matrix()).unwrap();
        let (hs, hgs) = e.hessian_apply(&sum, 0.6 - 1.1);
        assert!((hs.as_matrix() - ha.as_matrix() * 2.0 - hb.as_matrix()).amax() < 1e-9);
        assert!((hgs - 2.0 * hga - hgb).abs() < 1e-9);
    }

    #[test]
    fn hessian_symmetric_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let cov = random_pd(4, &mut rng);
            let x = random_pd(4, &mut rng);
            let gamma = x.spectral().unwrap().max_eigenvalue() + rng.random_range(0.05..1.0);
            let e = Expansion::new(&cov, &x, gamma).unwrap();
            let (z1, g1) = (random_sym(4, &mut rng), rng.random_range(-1.0..1.0));
            let (z2, g2) = (random_sym(4, &mut rng), rng.random_range(-1.0..1.0));
            let (h1, hg1) = e.hessian_apply(&z1, g1);
            let (h2, hg2) = e.hessian_apply(&z2, g2);
            let a = h1.inner(&z2) + hg1 * g2;
            let b = h2.inner(&z1) + hg2 * g1;
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            assert!(h1.inner(&z1) + hg1 * g1 > 0.0);
        }
    }
}
