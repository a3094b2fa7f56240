//! Phase-varying joint impedance estimated from gait-cycle torque data.
//!
//! A joint is modelled as a spring-damper, `tau = K(t) (theta - theta_eq(t)) + D(t) theta_dot`,
//! where stiffness `K` and damping `D` are polynomials in gait phase during
//! stance and constants during swing, and `theta_eq` is piecewise constant
//! over gait sections. [`estimator`] fits the coefficients and equilibria to
//! recorded torque under positivity, cycle-continuity and torque-rate
//! constraints; [`tuning`] applies hardware scaling and summarizes fits.

pub mod error;
pub mod estimator;
pub mod gait_data;
pub mod impedance;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod qp;
pub mod reference;
pub mod tuning;

pub use error::{DataError, EstimationError, ModelError};
pub use estimator::{
    build_problem, fit_cost, lipschitz_margin, multi_start, order_sweep, solve, EstimationProblem,
    EstimationResult, PhaseWindow, ProblemOptions, ScheduleSpec,
};
pub use gait_data::{
    estimate_velocity, load_gait_csv, read_gait_csv, resample, synthesize, CsvSchema,
    GaitCycleData, JointLabel, PhaseUnits, SyntheticSpec,
};
pub use impedance::{
    joint_power, EquilibriumSchedule, ImpedanceParameters, ImpedanceProfile, ValidationReport,
};
pub use qp::{solve_qp, BoxBounds, QpError, QpSolution};
pub use reference::ReferenceSet;
pub use tuning::{
    compare_sets, metrics, trend_report, tune, ComparisonTable, FitMetrics, TrendReport, TuningSpec,
};
