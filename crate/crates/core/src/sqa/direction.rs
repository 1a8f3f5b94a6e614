use nalgebra::DMatrix;

use super::derivatives::Expansion;
use super::pattern::{project_pattern, SparsityPattern};
use super::solver::{SolverConfig, StepKind};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Free dimension up to which a stalled conjugate-gradient solve is retried densely.
pub const DENSE_FALLBACK_LIMIT: usize = 2000;

/// Minimizer of the local quadratic model over the feasible direction space.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub delta_x: SymmetricMatrix,
    pub delta_gamma: f64,
    /// `δ = ⟨g, (ΔX, Δγ)⟩`, nonpositive.
    pub predicted_decrease: f64,
    /// Conjugate-gradient iterations spent (zero for steepest descent).
    pub linear_iterations: usize,
    /// Relative residual `‖P(Hz + g)‖ / ‖Pg‖` reported by the linear solver.
    pub linear_residual: f64,
    /// True when the dense fallback produced the step.
    pub dense_fallback: bool,
}

/// Element of the feasible direction space: a symmetric matrix and a scalar.
#[derive(Debug, Clone)]
pub(crate) struct Direction {
    pub(crate) x: DMatrix<f64>,
    pub(crate) g: f64,
}

impl Direction {
    fn zeros(p: usize) -> Self {
        Self {
            x: DMatrix::zeros(p, p),
            g: 0.0,
        }
    }

    fn dot(&self, other: &Self) -> f64 {
        self.x.dot(&other.x) + self.g * other.g
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        self.x += &other.x * a;
        self.g += a * other.g;
    }

    fn to_pair(&self) -> (SymmetricMatrix, f64) {
        (
            SymmetricMatrix::new(self.x.clone()).expect("finite direction"),
            self.g,
        )
    }
}

fn project(m: SymmetricMatrix, g: f64, pattern: &SparsityPattern) -> Direction {
    let (s, g) = project_pattern(m.as_matrix(), g, pattern);
    Direction {
        x: s.into_inner(),
        g,
    }
}

pub(crate) fn projected_gradient(
    model: &Expansion,
    rho: f64,
    pattern: &SparsityPattern,
) -> Direction {
    let (gx, gg) = model.gradient(rho);
    project(gx, gg, pattern)
}

/// Solves `P(Hz + g) = 0` over the feasible direction space.
///
/// Preconditioned conjugate gradients run matrix-free on `PHP`. If they stall and the
/// free dimension is at most [`DENSE_FALLBACK_LIMIT`], the reduced system is assembled in
/// an orthonormal basis of the direction space and solved by Cholesky.
pub fn descent_direction(
    cov: &SymmetricMatrix,
    x: &SymmetricMatrix,
    gamma: f64,
    rho: f64,
    pattern: &SparsityPattern,
    config: &SolverConfig,
) -> Result<NewtonStep> {
    if pattern.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: pattern.dim(),
        });
    }
    let model = Expansion::new(cov, x, gamma)?;
    let pg = projected_gradient(&model, rho, pattern);
    direction_from_model(&model, &pg, pattern, config, config.linear_tol)
}

pub(crate) fn direction_from_model(
    model: &Expansion,
    pg: &Direction,
    pattern: &SparsityPattern,
    config: &SolverConfig,
    linear_tol: f64,
) -> Result<NewtonStep> {
    let p = pattern.dim();
    let finish = |z: Direction, iterations, residual, dense| {
        let predicted_decrease = z.dot(pg);
        let (delta_x, delta_gamma) = z.to_pair();
        NewtonStep {
            delta_x,
            delta_gamma,
            predicted_decrease,
            linear_iterations: iterations,
            linear_residual: residual,
            dense_fallback: dense,
        }
    };
    if config.step_kind == StepKind::SteepestDescent {
        let mut z = Direction::zeros(p);
        z.axpy(-1.0, pg);
        return Ok(finish(z, 0, 0.0, false));
    }
    let b_norm = pg.norm();
    if b_norm == 0.0 {
        return Ok(finish(Direction::zeros(p), 0, 0.0, false));
    }
    let apply = |v: &Direction| {
        let sx = SymmetricMatrix::new(v.x.clone()).expect("finite direction");
        let (hx, hg) = model.hessian_apply(&sx, v.g);
        project(hx, hg, pattern)
    };
    let precondition = |v: &Direction| {
        let sx = SymmetricMatrix::new(v.x.clone()).expect("finite direction");
        let (mx, mg) = model.approximate_inverse(&sx, v.g);
        project(mx, mg, pattern)
    };

    let n_free = pattern.free_dimension();
    let max_iters = 2 * n_free + 20;
    let mut z = Direction::zeros(p);
    let mut r = Direction::zeros(p);
    r.axpy(-1.0, pg);
    let mut y = precondition(&r);
    let mut d = y.clone();
    let mut ry = r.dot(&y);
    let mut residual = 1.0;
    let mut iterations = 0;
    let mut breakdown = false;
    while iterations < max_iters {
        let hd = apply(&d);
        let curvature = d.dot(&hd);
        if !(curvature > 0.0) || !(ry > 0.0) {
            breakdown = true;
            break;
        }
        let alpha = ry / curvature;
        z.axpy(alpha, &d);
        r.axpy(-alpha, &hd);
        iterations += 1;
        residual = r.norm() / b_norm;
        if residual <= linear_tol {
            return Ok(finish(z, iterations, residual, false));
        }
        y = precondition(&r);
        let ry_next = r.dot(&y);
        let beta = ry_next / ry;
        ry = ry_next;
        let mut next = y.clone();
        next.axpy(beta, &d);
        d = next;
    }
    if !breakdown && residual <= linear_tol {
        return Ok(finish(z, iterations, residual, false));
    }
    if n_free <= DENSE_FALLBACK_LIMIT {
        let z = dense_solve(&apply, pg, pattern).ok_or(Error::LinearSolve {
            iterations,
            residual,
        })?;
        let hz = apply(&z);
        let mut res = hz;
        res.axpy(1.0, pg);
        let dense_residual = res.norm() / b_norm;
        return Ok(finish(z, iterations, dense_residual, true));
    }
    Err(Error::LinearSolve {
        iterations,
        residual,
    })
}

/// Orthonormal basis of the direction space: `eᵢeᵢᵀ`, `(eᵢeⱼᵀ + eⱼeᵢᵀ)/√2` for free
/// off-diagonal pairs, and the unit scalar.
fn basis_element(k: usize, free: &[(usize, usize)], p: usize) -> Direction {
    let mut v = Direction::zeros(p);
    if k == free.len() {
        v.g = 1.0;
    } else {
        let (i, j) = free[k];
        if i == j {
            v.x[(i, i)] = 1.0;
        } else {
            let w = std::f64::consts::FRAC_1_SQRT_2;
            v.x[(i, j)] = w;
            v.x[(j, i)] = w;
        }
    }
    v
}

fn dense_solve(
    apply: &impl Fn(&Direction) -> Direction,
    pg: &Direction,
    pattern: &SparsityPattern,
) -> Option<Direction> {
    let p = pattern.dim();
    let free: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| (0..=j).map(move |i| (i, j)))
        .filter(|&(i, j)| !pattern.contains(i, j))
        .collect();
    let n = free.len() + 1;
    let basis: Vec<Direction> = (0..n).map(|k| basis_element(k, &free, p)).collect();
    let mut h = DMatrix::zeros(n, n);
    for (c, bc) in basis.iter().enumerate() {
        let hb = apply(bc);
        for (r, br) in basis.iter().enumerate() {
            h[(r, c)] = br.dot(&hb);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let rhs = nalgebra::DVector::from_iterator(n, basis.iter().map(|b| -b.dot(pg)));
    let coeffs = h.cholesky()?.solve(&rhs);
    let mut z = Direction::zeros(p);
    for (c, b) in coeffs.iter().zip(&basis) {
        z.axpy(*c, b);
    }
    Some(z)
}
