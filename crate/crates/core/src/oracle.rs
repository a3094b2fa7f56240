//! Reference solvers for tests. Only compiled for tests or with the
//! `oracle` feature.
//!
//! [`projected_gradient_qp`] solves the same problems as [`crate::qp`] by a
//! different route: accelerated projected gradient on the dual, where the
//! only constraint is `lambda >= 0`. It is slow and only meant to check the
//! active-set solver on small instances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::qp::BoxBounds;

#[derive(Debug, Clone)]
pub struct QpInstance {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub bounds: BoxBounds,
}

impl QpInstance {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        if self.a.nrows() > 0 {
            let ax = &self.a * x;
            for i in 0..ax.len() {
                worst = worst.max(ax[i] - self.b[i]);
            }
        }
        for j in 0..x.len() {
            worst = worst
                .max(self.bounds.lower[j] - x[j])
                .max(x[j] - self.bounds.upper[j]);
        }
        worst
    }
}

/// Random strictly convex instance with a known feasible point, so it is
/// never infeasible. Some rows are made tight at that point.
pub fn random_instance<R: Rng>(rng: &mut R, dim: usize, rows: usize) -> QpInstance {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(dim, dim) * 0.05;
    let g = DVector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
    let x0 = DVector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
    let a = DMatrix::from_fn(rows, dim, |_, _| rng.random_range(-1.0..1.0));
    let ax0 = &a * &x0;
    let b = DVector::from_fn(rows, |i, _| {
        let slack: f64 = if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        };
        ax0[i] + slack
    });
    let mut lower = vec![f64::NEG_INFINITY; dim];
    let mut upper = vec![f64::INFINITY; dim];
    for j in 0..dim {
        if rng.random_bool(0.4) {
            lower[j] = x0[j] - rng.random_range(0.0..1.0);
            upper[j] = x0[j] + rng.random_range(0.0..1.0);
        }
    }
    QpInstance {
        h,
        g,
        a,
        b,
        bounds: BoxBounds::new(lower, upper),
    }
}

/// Minimize over `lambda >= 0` the dual function
/// `1/2 (g + C' lambda)' H^{-1} (g + C' lambda) + d' lambda`
/// with FISTA (adaptive restart), then recover `x = -H^{-1} (g + C' lambda)`.
/// Requires `H` positive definite.
pub fn projected_gradient_qp(inst: &QpInstance, max_iters: usize, tol: f64) -> DVector<f64> {
    let n = inst.g.len();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..inst.a.nrows() {
        rows.push(inst.a.row(i).transpose());
        rhs.push(inst.b[i]);
    }
    for j in 0..n {
        if inst.bounds.lower[j].is_finite() {
            let mut r = DVector::zeros(n);
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-inst.bounds.lower[j]);
        }
        if inst.bounds.upper[j].is_finite() {
            let mut r = DVector::zeros(n);
            r[j] = 1.0;
            rows.push(r);
            rhs.push(inst.bounds.upper[j]);
        }
    }
    let h_inv = inst
        .h
        .clone()
        .cholesky()
        .expect("oracle needs a positive definite H")
        .inverse();
    let x_of = |lambda: &DVector<f64>| -> DVector<f64> {
        let mut v = inst.g.clone();
        for (k, r) in rows.iter().enumerate() {
            v.axpy(lambda[k], r, 1.0);
        }
        -(&h_inv * v)
    };
    let m = rows.len();
    if m == 0 {
        return x_of(&DVector::zeros(0));
    }
    let c = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let q = &c * &h_inv * c.transpose();
    let lipschitz = SymmetricEigen::new(q.clone()).eigenvalues.amax().max(1e-12);
    let step = 1.0 / lipschitz;
    let d = DVector::from_vec(rhs);

    let mut lambda = DVector::zeros(m);
    let mut y = lambda.clone();
    let mut t: f64 = 1.0;
    for _ in 0..max_iters {
        let grad = -(&c * x_of(&y)) + &d;
        let next = (&y - grad * step).map(|v| v.max(0.0));
        let moved = (&next - &lambda).amax();
        if (&y - &next).dot(&(&next - &lambda)) > 0.0 {
            // momentum points uphill: restart from the last iterate
            y = lambda.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &lambda) * ((t - 1.0) / t_next);
        lambda = next;
        t = t_next;
        if moved < tol {
            break;
        }
    }
    x_of(&lambda)
}
