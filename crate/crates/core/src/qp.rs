//! Dense convex quadratic programs.
//!
//! Solves
//!
//! ```text
//!     minimize     1/2 x' H x + g' x
//!     subject to   A x <= b
//!                  lo <= x <= hi
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The method starts
//! from the unconstrained minimizer and adds violated constraints one at a
//! time while keeping dual feasibility, so every iterate after a full step is
//! optimal for the constraints added so far. Problems here are small (tens of
//! variables, a few thousand rows), so everything is dense.
//!
//! `H` only has to be positive semidefinite. Variables are rescaled by the
//! diagonal of `H` first; if the scaled Hessian is not numerically positive
//! definite a ridge of `1e-10 * trace(H) / dim` is added.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which constraint a row of the internal system came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintRef {
    /// Row `i` of `A x <= b`.
    Row(usize),
    /// `x[j] >= lo[j]`.
    Lower(usize),
    /// `x[j] <= hi[j]`.
    Upper(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("hessian is not positive semidefinite")]
    NotConvex,
    #[error("infeasible: constraints {constraints:?} admit no common point")]
    Infeasible { constraints: Vec<ConstraintRef> },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
}

/// Box bounds; use infinities for free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn free(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Constraints active at the solution, with their multipliers.
    pub active: Vec<(ConstraintRef, f64)>,
    /// Infinity norm of the stationarity residual `Hx + g + sum(u_i n_i)`,
    /// relative to `1 + |g|_inf`.
    pub kkt_residual: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    pub max_iterations: Option<usize>,
    /// Feasibility tolerance on unit-norm rows in the scaled problem.
    pub feasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: None,
            feasibility_tol: 1e-12,
        }
    }
}

/// Minimize `1/2 x'Hx + g'x` subject to `A x <= b` and box bounds.
pub fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    bounds: &BoxBounds,
) -> Result<QpSolution, QpError> {
    solve_qp_with(h, g, a_ineq, b_ineq, bounds, QpSettings::default())
}

pub fn solve_qp_with(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    bounds: &BoxBounds,
    settings: QpSettings,
) -> Result<QpSolution, QpError> {
    let n = g.len();
    check_dims(h, g, a_ineq, b_ineq, bounds)?;
    if h.iter()
        .chain(g.iter())
        .chain(a_ineq.iter())
        .chain(b_ineq.iter())
        .any(|v| !v.is_finite())
        || bounds.lower.iter().chain(&bounds.upper).any(|v| v.is_nan())
    {
        return Err(QpError::NonFinite);
    }
    for j in 0..n {
        if bounds.lower[j] > bounds.upper[j] {
            return Err(QpError::Infeasible {
                constraints: vec![ConstraintRef::Lower(j), ConstraintRef::Upper(j)],
            });
        }
    }

    // x = S y with S = diag(1 / sqrt(H_jj))
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let d = h[(j, j)];
            if d < 0.0 && d.abs() > 1e-12 * h.amax().max(1.0) {
                f64::NAN
            } else if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    if scale.iter().any(|s| s.is_nan()) {
        return Err(QpError::NotConvex);
    }
    let mut hs = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (h[(i, j)] + h[(j, i)]) * scale[i] * scale[j]
    });
    let gs = DVector::from_fn(n, |j, _| g[j] * scale[j]);

    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut refs: Vec<ConstraintRef> = Vec::new();
    // internal form: n_i' y >= d_i, rows normalised to unit length
    for i in 0..a_ineq.nrows() {
        let row = DVector::from_fn(n, |j, _| -a_ineq[(i, j)] * scale[j]);
        let norm = row.norm();
        if norm == 0.0 {
            if b_ineq[i] < 0.0 {
                return Err(QpError::Infeasible {
                    constraints: vec![ConstraintRef::Row(i)],
                });
            }
            continue;
        }
        rows.push(row / norm);
        rhs.push(-b_ineq[i] / norm);
        refs.push(ConstraintRef::Row(i));
    }
    for j in 0..n {
        if bounds.lower[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = 1.0;
            rows.push(row);
            rhs.push(bounds.lower[j] / scale[j]);
            refs.push(ConstraintRef::Lower(j));
        }
        if bounds.upper[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = -1.0;
            rows.push(row);
            rhs.push(-bounds.upper[j] / scale[j]);
            refs.push(ConstraintRef::Upper(j));
        }
    }

    let chol = match hs.clone().cholesky() {
        Some(c) if well_conditioned(c.l_dirty(), n) => c,
        _ => {
            let trace: f64 = (0..n).map(|j| hs[(j, j)]).sum();
            let ridge = 1e-10 * trace.max(f64::MIN_POSITIVE) / n.max(1) as f64;
            for j in 0..n {
                hs[(j, j)] += ridge;
            }
            hs.clone().cholesky().ok_or(QpError::NotConvex)?
        }
    };
    let l = chol.l();
    // J = L^{-T}, so that J J' = H^{-1}
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotConvex)?;
    let j_mat = l_inv.transpose();

    let max_iter = settings
        .max_iterations
        .unwrap_or(50 * (n + rows.len()) + 100);
    let mut state = DualActiveSet::new(j_mat, &gs, n);
    let iterations = state.run(&rows, &rhs, settings.feasibility_tol, max_iter, &refs)?;

    let y = state.x;
    let x = DVector::from_fn(n, |j, _| y[j] * scale[j]);
    let objective = 0.5 * x.dot(&(h * &x)) + g.dot(&x);

    // multipliers in original units: n_i' y >= d_i with n_i = -a_i S / |a_i S|
    let mut active = Vec::with_capacity(state.active.len());
    let mut grad = h * &x + g;
    for (k, &idx) in state.active.iter().enumerate() {
        let u = state.u[k];
        let (orig_row, factor) = match refs[idx] {
            ConstraintRef::Row(i) => {
                let row = DVector::from_fn(n, |j, _| a_ineq[(i, j)]);
                let norm = DVector::from_fn(n, |j, _| a_ineq[(i, j)] * scale[j]).norm();
                (row, 1.0 / norm)
            }
            ConstraintRef::Lower(j) => {
                let mut row = DVector::zeros(n);
                row[j] = -1.0;
                (row, 1.0 / scale[j])
            }
            ConstraintRef::Upper(j) => {
                let mut row = DVector::zeros(n);
                row[j] = 1.0;
                (row, 1.0 / scale[j])
            }
        };
        let mult = u * factor;
        grad += &orig_row * mult;
        active.push((refs[idx], mult));
    }
    let kkt_residual = grad.amax() / (1.0 + g.amax());

    let mut max_violation: f64 = 0.0;
    for i in 0..a_ineq.nrows() {
        let v: f64 = (0..n).map(|j| a_ineq[(i, j)] * x[j]).sum::<f64>() - b_ineq[i];
        max_violation = max_violation.max(v);
    }
    for j in 0..n {
        max_violation = max_violation
            .max(bounds.lower[j] - x[j])
            .max(x[j] - bounds.upper[j]);
    }

    Ok(QpSolution {
        x,
        objective,
        iterations,
        active,
        kkt_residual,
        max_violation,
    })
}

fn check_dims(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bounds: &BoxBounds,
) -> Result<(), QpError> {
    let n = g.len();
    if h.nrows() != n || h.ncols() != n {
        return Err(QpError::Dimension(format!(
            "H is {}x{}, g has {n} entries",
            h.nrows(),
            h.ncols()
        )));
    }
    if a.nrows() > 0 && a.ncols() != n {
        return Err(QpError::Dimension(format!(
            "A has {} columns, expected {n}",
            a.ncols()
        )));
    }
    if a.nrows() != b.len() {
        return Err(QpError::Dimension(format!(
            "A has {} rows, b has {}",
            a.nrows(),
            b.len()
        )));
    }
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(QpError::Dimension(format!(
            "bounds have {}/{} entries, expected {n}",
            bounds.lower.len(),
            bounds.upper.len()
        )));
    }
    Ok(())
}

fn well_conditioned(l: &DMatrix<f64>, n: usize) -> bool {
    let diag: Vec<f64> = (0..n).map(|j| l[(j, j)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    n == 0 || (min.is_finite() && min > 1e-7 * max)
}

/// Working state of the dual active-set iteration.
///
/// Invariants: `J' N_A = [R; 0]` for the active normals `N_A`, and `x` is
/// the minimizer subject to the active constraints holding with equality.
struct DualActiveSet {
    n: usize,
    x: DVector<f64>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
}

impl DualActiveSet {
    fn new(j: DMatrix<f64>, g: &DVector<f64>, n: usize) -> Self {
        let x = -(&j * (j.transpose() * g));
        Self {
            n,
            x,
            j,
            r: DMatrix::zeros(n, n),
            active: Vec::new(),
            u: Vec::new(),
        }
    }

    fn run(
        &mut self,
        rows: &[DVector<f64>],
        rhs: &[f64],
        tol: f64,
        max_iter: usize,
        refs: &[ConstraintRef],
    ) -> Result<usize, QpError> {
        let mut iterations = 0;
        let mut is_active = vec![false; rows.len()];
        loop {
            // most violated inactive constraint
            let mut pick = None;
            let mut worst = 0.0;
            for (i, row) in rows.iter().enumerate() {
                if is_active[i] {
                    continue;
                }
                let s = row.dot(&self.x) - rhs[i];
                if s < -tol * (1.0 + rhs[i].abs()) && s < worst {
                    worst = s;
                    pick = Some(i);
                }
            }
            let Some(p) = pick else {
                return Ok(iterations);
            };
            let np = &rows[p];
            let mut u_plus = 0.0;

            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(QpError::MaxIterations(max_iter));
                }
                let q = self.active.len();
                let d = self.j.transpose() * np;
                let mut z = DVector::zeros(self.n);
                for k in q..self.n {
                    z.axpy(d[k], &self.j.column(k), 1.0);
                }
                let r = self.back_substitute(&d, q);

                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for k in 0..q {
                    if r[k] > 1e-14 {
                        let ratio = self.u[k] / r[k];
                        if ratio < t1 {
                            t1 = ratio;
                            drop = Some(k);
                        }
                    }
                }
                let s_p = np.dot(&self.x) - rhs[p];
                let zn = z.dot(np);
                let t2 = if z.amax() > 1e-13 && zn > 1e-15 {
                    -s_p / zn
                } else {
                    f64::INFINITY
                };
                let t = t1.min(t2);
                if !t.is_finite() {
                    let mut constraints: Vec<ConstraintRef> =
                        self.active.iter().map(|&i| refs[i]).collect();
                    constraints.push(refs[p]);
                    return Err(QpError::Infeasible { constraints });
                }

                if t2.is_finite() {
                    self.x.axpy(t, &z, 1.0);
                }
                for k in 0..q {
                    self.u[k] -= t * r[k];
                }
                u_plus += t;

                if t2 <= t1 {
                    self.add(d, p, u_plus);
                    is_active[p] = true;
                    break;
                }
                let k = drop.expect("finite partial step has a blocking index");
                is_active[self.active[k]] = false;
                self.remove(k);
            }
        }
    }

    /// Solve `R[..q, ..q] r = d[..q]`.
    fn back_substitute(&self, d: &DVector<f64>, q: usize) -> Vec<f64> {
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        r
    }

    fn add(&mut self, mut d: DVector<f64>, idx: usize, u: f64) {
        let q = self.active.len();
        for k in (q + 1..self.n).rev() {
            let (c, s) = givens(d[k - 1], d[k]);
            if s == 0.0 {
                continue;
            }
            d[k - 1] = c * d[k - 1] + s * d[k];
            d[k] = 0.0;
            rotate_columns(&mut self.j, k - 1, k, c, s);
        }
        if d[q] < 0.0 {
            d[q] = -d[q];
            for row in 0..self.n {
                self.j[(row, q)] = -self.j[(row, q)];
            }
        }
        for k in 0..=q {
            self.r[(k, q)] = d[k];
        }
        self.active.push(idx);
        self.u.push(u);
    }

    fn remove(&mut self, pos: usize) {
        let q = self.active.len();
        self.active.remove(pos);
        self.u.remove(pos);
        for col in pos..q - 1 {
            for row in 0..self.n {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..self.n {
            self.r[(row, q - 1)] = 0.0;
        }
        // R is now upper Hessenberg from column `pos`
        for k in pos..q - 1 {
            let (c, s) = givens(self.r[(k, k)], self.r[(k + 1, k)]);
            if s == 0.0 {
                continue;
            }
            for col in k..q - 1 {
                let a = self.r[(k, col)];
                let b = self.r[(k + 1, col)];
                self.r[(k, col)] = c * a + s * b;
                self.r[(k + 1, col)] = -s * a + c * b;
            }
            self.r[(k + 1, k)] = 0.0;
            rotate_columns(&mut self.j, k, k + 1, c, s);
        }
        for k in pos..q - 1 {
            if self.r[(k, k)] < 0.0 {
                for col in k..q - 1 {
                    self.r[(k, col)] = -self.r[(k, col)];
                }
                for row in 0..self.n {
                    self.j[(row, k)] = -self.j[(row, k)];
                }
            }
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    let h = a.hypot(b);
    (a / h, b / h)
}

fn rotate_columns(m: &mut DMatrix<f64>, a: usize, b: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let x = m[(row, a)];
        let y = m[(row, b)];
        m[(row, a)] = c * x + s * y;
        m[(row, b)] = -s * x + c * y;
    }
}
