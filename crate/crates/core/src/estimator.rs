//! Constrained least-squares estimation of impedance parameters.
//!
//! The model torque `K(t) (theta - theta_eq) + D(t) theta_dot` is linear in
//! the polynomial coefficients when the equilibria are fixed, and linear in
//! the equilibria when the coefficients are fixed. Both subproblems are
//! convex QPs:
//!
//! 1. equilibria fixed: least squares over stiffness/damping coefficients,
//!    with `K, D >= 0` on a phase grid and the torque-rate bound
//!    `|d tau / d phase| <= c` between consecutive samples;
//! 2. coefficients fixed: least squares over the section angles inside
//!    their box bounds, under the same torque-rate bound.
//!
//! [`solve`] keeps the coefficients optimal for the current equilibria and
//! moves the equilibria by alternation, by a Gauss-Newton step on the joint
//! linearization, or by rescanning sections whose stiffness vanished,
//! whichever lowers the cost most. Plain alternation is slow on this problem
//! (the two blocks are strongly coupled); the Gauss-Newton candidate gives
//! fast local convergence. Every accepted iterate comes from exact subproblem
//! solves, so constraints hold throughout and the cost never increases.
//! Continuity across the cycle boundary holds structurally because the swing
//! value of each profile is its constant coefficient.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EstimationError, ModelError};
use crate::gait_data::{uniform_grid, GaitCycleData};
use crate::impedance::{
    check_boundaries, section_index, EquilibriumSchedule, ImpedanceParameters, ImpedanceProfile,
    ValidationReport, DEFAULT_STANCE_END, FEASIBILITY_TOL,
};
use crate::qp::{solve_qp, BoxBounds};
use crate::reference::ReferenceSet;

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_CONSTRAINT_GRID: usize = 1001;
pub const DEFAULT_TOL_REL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Default equilibrium bound magnitude in radians.
pub const DEFAULT_ANGLE_BOUND: f64 = 0.5;

/// Relative tightening of the torque-rate bound inside the subproblems, so
/// that solutions stay feasible after re-evaluation through the profiles.
const LIPSCHITZ_BACKOFF: f64 = 1e-10;
/// A cost this far below the data norm counts as an exact fit.
const EXACT_FIT: f64 = 1e-10;
/// Smallest trust radius for the Gauss-Newton angle step, radians.
const MIN_RADIUS: f64 = 1e-9;
/// Grid intervals when rescanning the angle of a section with no stiffness.
const RESCAN_POINTS: usize = 16;

/// Closed phase interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseWindow {
    pub start: f64,
    pub end: f64,
}

impl PhaseWindow {
    pub const FULL: PhaseWindow = PhaseWindow {
        start: 0.0,
        end: 1.0,
    };

    pub fn new(start: f64, end: f64) -> Result<Self, EstimationError> {
        if !(start.is_finite() && end.is_finite() && 0.0 <= start && start < end && end <= 1.0) {
            return Err(EstimationError::EmptyWindow(start, end));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

impl Default for PhaseWindow {
    fn default() -> Self {
        Self::FULL
    }
}

impl FromStr for PhaseWindow {
    type Err = String;

    /// `a:b`, e.g. `0:0.63`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected a:b, got `{s}`"))?;
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad window start `{a}`"))?;
        let b: f64 = b
            .trim()
            .parse()
            .map_err(|_| format!("bad window end `{b}`"))?;
        PhaseWindow::new(a, b).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AngleBounds {
    fn default() -> Self {
        Self {
            lo: -DEFAULT_ANGLE_BOUND,
            hi: DEFAULT_ANGLE_BOUND,
        }
    }
}

/// Section boundaries whose equilibrium angles are to be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub boundaries: Vec<f64>,
    pub label: Option<String>,
}

impl ScheduleSpec {
    pub fn new(boundaries: Vec<f64>, label: Option<String>) -> Result<Self, ModelError> {
        check_boundaries(&boundaries)?;
        Ok(Self { boundaries, label })
    }

    pub fn sections(&self) -> usize {
        self.boundaries.len() - 1
    }
}

impl From<ReferenceSet> for ScheduleSpec {
    fn from(set: ReferenceSet) -> Self {
        Self {
            boundaries: set.boundaries(),
            label: Some(set.label().to_string()),
        }
    }
}

/// Optional settings for [`build_problem`]; `None` takes the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemOptions {
    pub stiffness_order: Option<usize>,
    pub damping_order: Option<usize>,
    pub stance_end: Option<f64>,
    pub lipschitz_c: Option<f64>,
    pub angle_bounds: Option<Vec<AngleBounds>>,
    pub fit_window: Option<PhaseWindow>,
    pub constraint_grid_n: Option<usize>,
    pub tol_rel: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationProblem {
    pub data: GaitCycleData,
    pub schedule: ScheduleSpec,
    pub stiffness_order: usize,
    pub damping_order: usize,
    pub stance_end: f64,
    /// Bound on `|d tau / d phase|`, N·m per unit phase.
    pub lipschitz_c: f64,
    pub angle_bounds: Vec<AngleBounds>,
    pub fit_window: PhaseWindow,
    pub constraint_grid_n: usize,
    pub tol_rel: f64,
    pub max_iters: usize,
}

/// Fill in defaults and check the problem.
pub fn build_problem(
    data: GaitCycleData,
    schedule: ScheduleSpec,
    options: ProblemOptions,
) -> Result<EstimationProblem, EstimationError> {
    check_boundaries(&schedule.boundaries)?;
    let fit_window = options.fit_window.unwrap_or_default();
    PhaseWindow::new(fit_window.start, fit_window.end)?;
    let lipschitz_c = match options.lipschitz_c {
        Some(c) => c,
        None => default_lipschitz(&data, fit_window)?,
    };
    let problem = EstimationProblem {
        angle_bounds: options
            .angle_bounds
            .unwrap_or_else(|| vec![AngleBounds::default(); schedule.sections()]),
        schedule,
        stiffness_order: options.stiffness_order.unwrap_or(DEFAULT_ORDER),
        damping_order: options.damping_order.unwrap_or(DEFAULT_ORDER),
        stance_end: options.stance_end.unwrap_or(DEFAULT_STANCE_END),
        lipschitz_c,
        fit_window,
        constraint_grid_n: options.constraint_grid_n.unwrap_or(DEFAULT_CONSTRAINT_GRID),
        tol_rel: options.tol_rel.unwrap_or(DEFAULT_TOL_REL),
        max_iters: options.max_iters.unwrap_or(DEFAULT_MAX_ITERS),
        data,
    };
    problem.check()?;
    Ok(problem)
}

/// Twice the steepest torque slope between consecutive samples in the window.
fn default_lipschitz(data: &GaitCycleData, window: PhaseWindow) -> Result<f64, EstimationError> {
    let idx = window_indices(data, window)?;
    let phase = data.phase();
    let torque = data.torque();
    let steepest = idx
        .windows(2)
        .map(|w| ((torque[w[1]] - torque[w[0]]) / (phase[w[1]] - phase[w[0]])).abs())
        .fold(0.0, f64::max);
    Ok(if steepest > 0.0 { 2.0 * steepest } else { 1.0 })
}

fn window_indices(
    data: &GaitCycleData,
    window: PhaseWindow,
) -> Result<Vec<usize>, EstimationError> {
    let idx: Vec<usize> = data
        .phase()
        .iter()
        .enumerate()
        .filter(|(_, &t)| window.contains(t))
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        return Err(EstimationError::WindowTooSparse(window.start, window.end));
    }
    Ok(idx)
}

impl EstimationProblem {
    pub fn check(&self) -> Result<(), EstimationError> {
        check_boundaries(&self.schedule.boundaries)?;
        if !(self.stance_end > 0.0 && self.stance_end < 1.0) {
            return Err(ModelError::StanceEnd(self.stance_end).into());
        }
        if !(self.lipschitz_c.is_finite() && self.lipschitz_c > 0.0) {
            return Err(EstimationError::Lipschitz(self.lipschitz_c));
        }
        PhaseWindow::new(self.fit_window.start, self.fit_window.end)?;
        window_indices(&self.data, self.fit_window)?;
        if self.angle_bounds.len() != self.schedule.sections() {
            return Err(EstimationError::AngleBoundCount {
                sections: self.schedule.sections(),
                bounds: self.angle_bounds.len(),
            });
        }
        for (section, b) in self.angle_bounds.iter().enumerate() {
            if !b.lo.is_finite() || !b.hi.is_finite() || b.lo > b.hi {
                return Err(EstimationError::AngleBounds {
                    section,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        if self.constraint_grid_n < 2 {
            return Err(EstimationError::ConstraintGrid(self.constraint_grid_n));
        }
        Ok(())
    }
}

/// Constraint status of a set of parameters on a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub validation: ValidationReport,
    pub lipschitz_c: f64,
    /// `max |d tau / d phase| - c` over the fit window; `<= 0` is satisfied.
    pub lipschitz_margin: f64,
    pub lipschitz_satisfied: bool,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.validation.all_satisfied() && self.lipschitz_satisfied
    }

    pub fn worst_violation(&self) -> f64 {
        self.validation
            .worst_violation()
            .max(self.lipschitz_margin.max(0.0))
    }
}

pub fn constraint_report(
    params: &ImpedanceParameters,
    problem: &EstimationProblem,
) -> Result<ConstraintReport, EstimationError> {
    let validation = params.validate(problem.constraint_grid_n)?;
    let idx = window_indices(&problem.data, problem.fit_window)?;
    let tau = params.torque_trajectory(&problem.data)?;
    let tau_w: Vec<f64> = idx.iter().map(|&i| tau[i]).collect();
    let phase_w: Vec<f64> = idx.iter().map(|&i| problem.data.phase()[i]).collect();
    let lipschitz_margin = lipschitz_margin(&tau_w, &phase_w, problem.lipschitz_c)?;
    Ok(ConstraintReport {
        validation,
        lipschitz_c: problem.lipschitz_c,
        lipschitz_margin,
        lipschitz_satisfied: lipschitz_margin <= FEASIBILITY_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub cost: f64,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params: ImpedanceParameters,
    /// `||tau_data - tau||_2` over the fit window.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_report: ConstraintReport,
    pub solver_trace: Vec<TraceEntry>,
}

impl EstimationResult {
    pub fn label(&self) -> Option<&str> {
        self.params.schedule().label()
    }

    /// Converged with every constraint within tolerance.
    pub fn is_clean(&self) -> bool {
        self.converged && self.constraint_report.feasible()
    }

    /// `iteration,cost,worst_violation` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,cost,worst_violation\n");
        for e in &self.solver_trace {
            let _ = writeln!(out, "{},{:?},{:?}", e.iteration, e.cost, e.worst_violation);
        }
        out
    }
}

/// `||tau_data - tau||_2` over the samples inside `window`.
pub fn fit_cost(
    params: &ImpedanceParameters,
    data: &GaitCycleData,
    window: PhaseWindow,
) -> Result<f64, EstimationError> {
    let tau = params.torque_trajectory(data)?;
    let mut sum = 0.0;
    let mut count = 0;
    for (i, &t) in data.phase().iter().enumerate() {
        if window.contains(t) {
            let r = data.torque()[i] - tau[i];
            sum += r * r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EstimationError::EmptyWindow(window.start, window.end));
    }
    Ok(sum.sqrt())
}

/// Worst `|d tau / d phase| - c` over consecutive samples.
pub fn lipschitz_margin(torque: &[f64], phase: &[f64], c: f64) -> Result<f64, EstimationError> {
    if torque.len() != phase.len() {
        return Err(ModelError::LengthMismatch(torque.len(), phase.len()).into());
    }
    if torque.len() < 2 {
        return Err(ModelError::GridTooSmall {
            needed: 2,
            got: torque.len(),
        }
        .into());
    }
    Ok(torque
        .windows(2)
        .zip(phase.windows(2))
        .map(|(tw, pw)| ((tw[1] - tw[0]) / (pw[1] - pw[0])).abs() - c)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Current iterate: equilibria and the coefficients that are optimal for them.
struct State {
    kc: Vec<f64>,
    dc: Vec<f64>,
    angles: Vec<f64>,
    cost: f64,
}

/// Samples of the fit window and everything the two subproblems reuse.
struct Design<'a> {
    problem: &'a EstimationProblem,
    section: Vec<usize>,
    k_basis: Vec<Vec<f64>>,
    d_basis: Vec<Vec<f64>>,
    angle: Vec<f64>,
    velocity: Vec<f64>,
    torque: Vec<f64>,
    /// Phase step to the next window sample.
    dt: Vec<f64>,
    /// Stance grid points for the positivity rows.
    grid: Vec<f64>,
    observed: Vec<bool>,
    data_norm: f64,
    rate_bound: f64,
}

fn basis(t: f64, order: usize, stance_end: f64) -> Vec<f64> {
    if t < stance_end {
        let mut powers = Vec::with_capacity(order + 1);
        let mut p = 1.0;
        for _ in 0..=order {
            powers.push(p);
            p *= t;
        }
        powers
    } else {
        let mut v = vec![0.0; order + 1];
        v[0] = 1.0;
        v
    }
}

impl<'a> Design<'a> {
    fn new(problem: &'a EstimationProblem) -> Result<Self, EstimationError> {
        let idx = window_indices(&problem.data, problem.fit_window)?;
        let d = &problem.data;
        let bounds = &problem.schedule.boundaries;
        let pick = |ch: &[f64]| idx.iter().map(|&i| ch[i]).collect::<Vec<_>>();
        let phase = pick(d.phase());
        let section: Vec<usize> = phase.iter().map(|&t| section_index(bounds, t)).collect();
        let mut observed = vec![false; problem.schedule.sections()];
        for &s in &section {
            observed[s] = true;
        }
        let torque = pick(d.torque());
        let data_norm = torque.iter().map(|t| t * t).sum::<f64>().sqrt();
        Ok(Self {
            problem,
            k_basis: phase
                .iter()
                .map(|&t| basis(t, problem.stiffness_order, problem.stance_end))
                .collect(),
            d_basis: phase
                .iter()
                .map(|&t| basis(t, problem.damping_order, problem.stance_end))
                .collect(),
            dt: phase.windows(2).map(|w| w[1] - w[0]).collect(),
            angle: pick(d.angle()),
            velocity: pick(d.velocity()),
            torque,
            section,
            grid: uniform_grid(problem.constraint_grid_n)
                .into_iter()
                .filter(|&t| t < problem.stance_end)
                .collect(),
            observed,
            data_norm,
            rate_bound: problem.lipschitz_c * (1.0 - LIPSCHITZ_BACKOFF),
        })
    }

    fn samples(&self) -> usize {
        self.torque.len()
    }

    /// Per-sample `(K, D)` for the given coefficients.
    fn gains(&self, kc: &[f64], dc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dot = |b: &[f64], c: &[f64]| b.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        (
            self.k_basis.iter().map(|b| dot(b, kc)).collect(),
            self.d_basis.iter().map(|b| dot(b, dc)).collect(),
        )
    }

    fn model_torque(&self, kc: &[f64], dc: &[f64], angles: &[f64]) -> Vec<f64> {
        let (k, d) = self.gains(kc, dc);
        (0..self.samples())
            .map(|w| k[w] * (self.angle[w] - angles[self.section[w]]) + d[w] * self.velocity[w])
            .collect()
    }

    fn cost(&self, kc: &[f64], dc: &[f64], angles: &[f64]) -> f64 {
        self.model_torque(kc, dc, angles)
            .iter()
            .zip(&self.torque)
            .map(|(m, y)| (y - m) * (y - m))
            .sum::<f64>()
            .sqrt()
    }

    fn worst_violation(&self, kc: &[f64], dc: &[f64], angles: &[f64]) -> f64 {
        let horner = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, x| acc * t + x);
        let mut worst: f64 = (-kc[0]).max(-dc[0]).max(0.0);
        for &t in &self.grid {
            worst = worst.max(-horner(kc, t)).max(-horner(dc, t));
        }
        let tau = self.model_torque(kc, dc, angles);
        for (p, w) in tau.windows(2).enumerate() {
            worst = worst.max(((w[1] - w[0]) / self.dt[p]).abs() - self.problem.lipschitz_c);
        }
        worst
    }

    /// Rate rows `+-(row_{p+1} - row_p) / dt_p <= c -+ (base_{p+1} - base_p) / dt_p`.
    fn push_rate_rows(
        &self,
        design: &DMatrix<f64>,
        base: &[f64],
        rows: &mut Vec<Vec<f64>>,
        rhs: &mut Vec<f64>,
    ) {
        let nv = design.ncols();
        for p in 0..self.dt.len() {
            let diff: Vec<f64> = (0..nv)
                .map(|j| (design[(p + 1, j)] - design[(p, j)]) / self.dt[p])
                .collect();
            let shift = (base[p + 1] - base[p]) / self.dt[p];
            rows.push(diff.clone());
            rhs.push(self.rate_bound - shift);
            rows.push(diff.into_iter().map(|v| -v).collect());
            rhs.push(self.rate_bound + shift);
        }
    }

    /// Coefficient half-step with the equilibria held fixed.
    fn fit_coefficients(&self, angles: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EstimationError> {
        let nk = self.problem.stiffness_order + 1;
        let nd = self.problem.damping_order + 1;
        let nv = nk + nd;
        let nw = self.samples();
        let design = DMatrix::from_fn(nw, nv, |w, j| {
            if j < nk {
                self.k_basis[w][j] * (self.angle[w] - angles[self.section[w]])
            } else {
                self.d_basis[w][j - nk] * self.velocity[w]
            }
        });

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        // -K(t) <= 0 and -D(t) <= 0 at each stance grid point
        for &t in &self.grid {
            for (offset, count) in [(0, nk), (nk, nd)] {
                let mut row = vec![0.0; nv];
                let mut p = 1.0;
                for j in 0..count {
                    row[offset + j] = -p;
                    p *= t;
                }
                rows.push(row);
                rhs.push(0.0);
            }
        }
        if self.grid.is_empty() {
            // constant terms still carry the swing values
            let mut row = vec![0.0; nv];
            row[0] = -1.0;
            rows.push(row);
            rhs.push(0.0);
            let mut row = vec![0.0; nv];
            row[nk] = -1.0;
            rows.push(row);
            rhs.push(0.0);
        }
        self.push_rate_rows(&design, &vec![0.0; nw], &mut rows, &mut rhs);

        let x = self.least_squares(
            &design,
            &self.torque,
            &rows,
            &rhs,
            &BoxBounds::free(nv),
            "coefficient",
        )?;
        Ok((x[..nk].to_vec(), x[nk..].to_vec()))
    }

    /// Equilibrium half-step with the coefficients held fixed. Sections with
    /// no samples in the window, or with zero stiffness over their samples,
    /// keep their current angle.
    fn fit_angles(
        &self,
        kc: &[f64],
        dc: &[f64],
        angles: &[f64],
    ) -> Result<Vec<f64>, EstimationError> {
        let (k, d) = self.gains(kc, dc);
        let sections = angles.len();
        let live = self.live_sections(&k);
        let mut var_of = vec![None; sections];
        let mut free = Vec::new();
        for s in 0..sections {
            if live[s] {
                var_of[s] = Some(free.len());
                free.push(s);
            }
        }
        if free.is_empty() {
            return Ok(angles.to_vec());
        }

        let nw = self.samples();
        let mut base = vec![0.0; nw];
        let mut design = DMatrix::zeros(nw, free.len());
        for w in 0..nw {
            let s = self.section[w];
            base[w] = k[w] * self.angle[w] + d[w] * self.velocity[w];
            match var_of[s] {
                Some(v) => design[(w, v)] = -k[w],
                None => base[w] -= k[w] * angles[s],
            }
        }
        let target: Vec<f64> = self.torque.iter().zip(&base).map(|(y, b)| y - b).collect();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        self.push_rate_rows(&design, &base, &mut rows, &mut rhs);
        let bounds = BoxBounds::new(
            free.iter()
                .map(|&s| self.problem.angle_bounds[s].lo)
                .collect(),
            free.iter()
                .map(|&s| self.problem.angle_bounds[s].hi)
                .collect(),
        );
        let x = self.least_squares(&design, &target, &rows, &rhs, &bounds, "equilibrium")?;
        let mut out = angles.to_vec();
        for (v, &s) in free.iter().enumerate() {
            let b = self.problem.angle_bounds[s];
            out[s] = x[v].clamp(b.lo, b.hi);
        }
        Ok(out)
    }

    /// Squared stiffness over each section's samples.
    fn section_weights(&self, k: &[f64]) -> Vec<f64> {
        let mut weight = vec![0.0; self.problem.schedule.sections()];
        for w in 0..self.samples() {
            weight[self.section[w]] += k[w] * k[w];
        }
        weight
    }

    /// Observed sections whose angle still moves the model torque.
    fn live_sections(&self, k: &[f64]) -> Vec<bool> {
        let weight = self.section_weights(k);
        let scale = weight.iter().cloned().fold(0.0, f64::max);
        (0..weight.len())
            .map(|s| self.observed[s] && weight[s] > 0.0 && weight[s] > 1e-20 * scale)
            .collect()
    }

    /// Observed sections where the stiffness is so small that no angle in
    /// the bounds changes the torque noticeably.
    fn dead_sections(&self, k: &[f64]) -> Vec<usize> {
        let weight = self.section_weights(k);
        let floor = 1e-8 * self.data_norm * self.data_norm;
        (0..weight.len())
            .filter(|&s| {
                let b = self.problem.angle_bounds[s];
                self.observed[s] && b.hi > b.lo && weight[s] * (b.hi - b.lo).powi(2) <= floor
            })
            .collect()
    }

    fn is_exact(&self, cost: f64) -> bool {
        cost <= EXACT_FIT * self.data_norm
    }

    fn initial_radius(&self) -> f64 {
        let widest = self
            .problem
            .angle_bounds
            .iter()
            .map(|b| b.hi - b.lo)
            .fold(0.0, f64::max);
        (0.25 * widest).max(MIN_RADIUS)
    }

    /// Optimal coefficients for fixed equilibria.
    fn state_at(&self, angles: Vec<f64>) -> Result<State, EstimationError> {
        let (kc, dc) = self.fit_coefficients(&angles)?;
        let cost = self.cost(&kc, &dc, &angles);
        Ok(State {
            kc,
            dc,
            angles,
            cost,
        })
    }

    fn improve(&self, state: &State, radius: &mut f64) -> Result<Option<State>, EstimationError> {
        let alternated = self.fit_angles(&state.kc, &state.dc, &state.angles)?;
        let mut best = self.state_at(alternated)?;

        let widest = 4.0 * self.initial_radius();
        for _ in 0..3 {
            let Some(angles) = self.gauss_newton(state, *radius) else {
                break;
            };
            let candidate = self.state_at(angles)?;
            if candidate.cost < state.cost {
                *radius = (2.0 * *radius).min(widest);
                if candidate.cost < best.cost {
                    best = candidate;
                }
                break;
            }
            *radius = (0.25 * *radius).max(MIN_RADIUS);
        }

        if state.cost - best.cost <= self.problem.tol_rel * state.cost {
            let (k, _) = self.gains(&state.kc, &state.dc);
            for s in self.dead_sections(&k) {
                let b = self.problem.angle_bounds[s];
                for i in 0..=RESCAN_POINTS {
                    let mut angles = state.angles.clone();
                    angles[s] = b.lo + (b.hi - b.lo) * i as f64 / RESCAN_POINTS as f64;
                    let candidate = self.state_at(angles)?;
                    if candidate.cost < best.cost {
                        best = candidate;
                    }
                }
            }
        }
        Ok(Some(best))
    }

    /// Joint Gauss-Newton step on coefficients and live angles, with the
    /// angle moves limited to `radius`. Only the new angles are returned;
    /// the caller refits the coefficients exactly.
    fn gauss_newton(&self, state: &State, radius: f64) -> Option<Vec<f64>> {
        let nk = self.problem.stiffness_order + 1;
        let nd = self.problem.damping_order + 1;
        let (k, _) = self.gains(&state.kc, &state.dc);
        let live = self.live_sections(&k);
        let free: Vec<usize> = (0..live.len()).filter(|&s| live[s]).collect();
        if free.is_empty() {
            return None;
        }
        let nv = nk + nd + free.len();
        let nw = self.samples();
        let mut design = DMatrix::zeros(nw, nv);
        for w in 0..nw {
            let s = self.section[w];
            let offset = self.angle[w] - state.angles[s];
            for j in 0..nk {
                design[(w, j)] = self.k_basis[w][j] * offset;
            }
            for j in 0..nd {
                design[(w, nk + j)] = self.d_basis[w][j] * self.velocity[w];
            }
            if let Some(v) = free.iter().position(|&f| f == s) {
                design[(w, nk + nd + v)] = -k[w];
            }
        }
        let tau = self.model_torque(&state.kc, &state.dc, &state.angles);
        let residual: Vec<f64> = self.torque.iter().zip(&tau).map(|(y, m)| y - m).collect();

        let horner = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, x| acc * t + x);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for &t in &self.grid {
            for (offset, count, coeffs) in [(0, nk, &state.kc), (nk, nd, &state.dc)] {
                let mut row = vec![0.0; nv];
                let mut p = 1.0;
                for j in 0..count {
                    row[offset + j] = -p;
                    p *= t;
                }
                rows.push(row);
                rhs.push(horner(coeffs, t).max(0.0));
            }
        }
        self.push_rate_rows(&design, &tau, &mut rows, &mut rhs);
        let mut lower = vec![f64::NEG_INFINITY; nv];
        let mut upper = vec![f64::INFINITY; nv];
        for (v, &s) in free.iter().enumerate() {
            let b = self.problem.angle_bounds[s];
            lower[nk + nd + v] = (b.lo - state.angles[s]).max(-radius).min(0.0);
            upper[nk + nd + v] = (b.hi - state.angles[s]).min(radius).max(0.0);
        }
        let step = self
            .least_squares(
                &design,
                &residual,
                &rows,
                &rhs,
                &BoxBounds::new(lower, upper),
                "gauss-newton",
            )
            .ok()?;
        let mut angles = state.angles.clone();
        for (v, &s) in free.iter().enumerate() {
            let b = self.problem.angle_bounds[s];
            angles[s] = (angles[s] + step[nk + nd + v]).clamp(b.lo, b.hi);
        }
        Some(angles)
    }

    fn least_squares(
        &self,
        design: &DMatrix<f64>,
        target: &[f64],
        rows: &[Vec<f64>],
        rhs: &[f64],
        bounds: &BoxBounds,
        step: &'static str,
    ) -> Result<Vec<f64>, EstimationError> {
        let nv = design.ncols();
        let y = DVector::from_column_slice(target);
        let h = design.transpose() * design;
        let g = -(design.transpose() * y);
        let a = DMatrix::from_fn(rows.len(), nv, |i, j| rows[i][j]);
        let b = DVector::from_column_slice(rhs);
        let sol = solve_qp(&h, &g, &a, &b, bounds)
            .map_err(|source| EstimationError::Subproblem { step, source })?;
        Ok(sol.x.iter().copied().collect())
    }
}

/// Run the estimation from `init`'s equilibria, or from angles drawn
/// uniformly inside the bounds using `seed`.
///
/// The coefficients are always the exact optimum for the current equilibria.
/// Each iteration tries an alternation step (equilibria refit, then
/// coefficients refit), a trust-region Gauss-Newton step on the joint
/// linearization, and, for sections whose stiffness has collapsed to zero,
/// a scan of that section's angle range. The cheapest candidate is kept if
/// it does not raise the cost.
pub fn solve(
    problem: &EstimationProblem,
    init: Option<&ImpedanceParameters>,
    seed: u64,
) -> Result<EstimationResult, EstimationError> {
    problem.check()?;
    let design = Design::new(problem)?;
    let sections = problem.schedule.sections();
    let angles = match init {
        Some(p) => {
            let a = p.schedule().angles();
            if a.len() != sections {
                return Err(ModelError::AngleCount {
                    sections,
                    angles: a.len(),
                }
                .into());
            }
            a.iter()
                .zip(&problem.angle_bounds)
                .map(|(&x, b)| x.clamp(b.lo, b.hi))
                .collect()
        }
        None => initial_angles(problem, &design.observed, seed),
    };

    let mut state = design.state_at(angles)?;
    let mut radius = design.initial_radius();
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=problem.max_iters {
        let mut stalled = design.is_exact(state.cost);
        if !stalled {
            match design.improve(&state, &mut radius)? {
                Some(next) if next.cost <= state.cost => {
                    stalled = state.cost - next.cost <= problem.tol_rel * state.cost;
                    state = next;
                }
                _ => stalled = true,
            }
        }
        if !state.cost.is_finite() {
            return Err(EstimationError::NonFiniteCost(iteration));
        }
        trace.push(TraceEntry {
            iteration,
            cost: state.cost,
            worst_violation: design
                .worst_violation(&state.kc, &state.dc, &state.angles)
                .max(0.0),
        });
        if stalled || design.is_exact(state.cost) {
            converged = true;
            break;
        }
    }

    let params = ImpedanceParameters::new(
        ImpedanceProfile::new(state.kc, problem.stance_end)?,
        ImpedanceProfile::new(state.dc, problem.stance_end)?,
        EquilibriumSchedule::new(
            problem.schedule.boundaries.clone(),
            state.angles,
            problem.schedule.label.clone(),
        )?,
    )?;
    let cost = fit_cost(&params, &problem.data, problem.fit_window)?;
    if !cost.is_finite() {
        return Err(EstimationError::NonFiniteCost(trace.len()));
    }
    Ok(EstimationResult {
        constraint_report: constraint_report(&params, problem)?,
        params,
        cost,
        iterations: trace.len(),
        converged,
        solver_trace: trace,
    })
}

/// Observed sections start uniformly inside their bounds; sections without
/// data sit at the middle of theirs.
fn initial_angles(problem: &EstimationProblem, observed: &[bool], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem
        .angle_bounds
        .iter()
        .zip(observed)
        .map(|(b, &seen)| {
            let u: f64 = rng.random();
            if seen {
                b.lo + u * (b.hi - b.lo)
            } else {
                0.5 * (b.lo + b.hi)
            }
        })
        .collect()
}

/// Seed of start `index` in [`multi_start`]; start 0 uses `seed` itself.
pub fn start_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Best of `n_starts` seeded cold starts: lowest cost among converged runs,
/// ties going to the earlier start. Falls back to the best unconverged run
/// when none converged.
pub fn multi_start(
    problem: &EstimationProblem,
    n_starts: usize,
    seed: u64,
) -> Result<EstimationResult, EstimationError> {
    if n_starts == 0 {
        return Err(EstimationError::NoStarts);
    }
    problem.check()?;
    let runs: Vec<Result<EstimationResult, EstimationError>> = (0..n_starts)
        .into_par_iter()
        .map(|i| solve(problem, None, start_seed(seed, i)))
        .collect();

    let mut best: Option<usize> = None;
    let mut first_error = None;
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok(r) => {
                let better = match best {
                    None => true,
                    Some(j) => preferable(r, runs[j].as_ref().expect("best is ok")),
                };
                if better {
                    best = Some(i);
                }
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    match best {
        Some(i) => Ok(runs
            .into_iter()
            .nth(i)
            .expect("index in range")
            .expect("best is ok")),
        None => Err(EstimationError::AllStartsFailed(
            n_starts,
            first_error.unwrap_or_default(),
        )),
    }
}

/// Converged beats unconverged, then lower cost.
fn preferable(a: &EstimationResult, b: &EstimationResult) -> bool {
    (a.converged && !b.converged) || (a.converged == b.converged && a.cost < b.cost)
}

/// Estimate with `m = n = order` for each order in turn. Each order is run
/// from `n_starts` cold starts and also warm-started from the equilibria of
/// the previous order; the better of the two is kept. Since lower orders
/// are nested in higher ones, the warm start never begins above the
/// previous optimum.
pub fn order_sweep(
    problem: &EstimationProblem,
    orders: impl IntoIterator<Item = usize>,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<(usize, EstimationResult)>, EstimationError> {
    let mut out: Vec<(usize, EstimationResult)> = Vec::new();
    for order in orders {
        let mut p = problem.clone();
        p.stiffness_order = order;
        p.damping_order = order;
        let mut best = multi_start(&p, n_starts, seed)?;
        if let Some((_, prev)) = out.last() {
            let warm = solve(&p, Some(&prev.params), seed)?;
            if preferable(&warm, &best) {
                best = warm;
            }
        }
        out.push((order, best));
    }
    Ok(out)
}
