//! Hardware tuning of estimated impedance, plus fit metrics, trend checks
//! and a side-by-side comparison of estimates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{EstimationError, ModelError};
use crate::estimator::EstimationResult;
use crate::gait_data::{uniform_grid, GaitCycleData};
use crate::impedance::{joint_power, ImpedanceParameters};

/// Push-off is searched for between heel-off and just past toe-off.
pub const PUSHOFF_WINDOW: (f64, f64) = (0.40, 0.70);
/// Early stance runs from heel-strike to heel-off.
pub const EARLY_STANCE_END: f64 = 0.40;
/// Terminal-stance probe phase for the damping trend.
pub const TERMINAL_STANCE_PROBE: f64 = 0.55;

/// `K_tuned = alpha K + gamma`, `D_tuned = beta D`, optionally with new angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuned_angles: Option<Vec<f64>>,
}

impl TuningSpec {
    pub fn scale(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            tuned_angles: None,
        }
    }
}

pub fn tune(
    params: &ImpedanceParameters,
    spec: &TuningSpec,
) -> Result<ImpedanceParameters, ModelError> {
    let TuningSpec {
        alpha, beta, gamma, ..
    } = *spec;
    if !(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0) {
        return Err(ModelError::NegativeTuning { alpha, beta, gamma });
    }
    let stiffness =
        params
            .stiffness()
            .map_coeffs(|i, c| if i == 0 { alpha * c + gamma } else { alpha * c })?;
    let damping = params.damping().map_coeffs(|_, c| beta * c)?;
    let schedule = match &spec.tuned_angles {
        Some(angles) => params.schedule().with_angles(angles.clone())?,
        None => params.schedule().clone(),
    };
    ImpedanceParameters::new(stiffness, damping, schedule)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseValue {
    pub phase: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub rmse: f64,
    /// Largest model torque.
    pub peak_torque: PhaseValue,
    /// Largest model power `tau * theta_dot`.
    pub peak_power: PhaseValue,
    /// Phase of peak power generation inside [`PUSHOFF_WINDOW`], if any
    /// samples fall there. With positive stiffness and damping, `tau *
    /// theta_dot` is power absorbed by the joint, so generation is its most
    /// negative value.
    pub pushoff_phase: Option<f64>,
}

fn argmax(phase: &[f64], values: &[f64], keep: impl Fn(f64) -> bool) -> Option<PhaseValue> {
    phase.iter().zip(values).filter(|(t, _)| keep(**t)).fold(
        None,
        |best: Option<PhaseValue>, (&phase, &value)| match best {
            Some(b) if b.value >= value => Some(b),
            _ => Some(PhaseValue { phase, value }),
        },
    )
}

pub fn metrics(
    params: &ImpedanceParameters,
    data: &GaitCycleData,
) -> Result<FitMetrics, ModelError> {
    let tau = params.torque_trajectory(data)?;
    let power = joint_power(&tau, data.velocity())?;
    let generated: Vec<f64> = power.iter().map(|p| -p).collect();
    let sse: f64 = tau
        .iter()
        .zip(data.torque())
        .map(|(m, y)| (y - m) * (y - m))
        .sum();
    let rmse = (sse / data.len() as f64).sqrt();
    let phase = data.phase();
    let all = |_| true;
    Ok(FitMetrics {
        rmse,
        peak_torque: argmax(phase, &tau, all).expect("data has samples"),
        peak_power: argmax(phase, &power, all).expect("data has samples"),
        pushoff_phase: argmax(phase, &generated, |t| {
            PUSHOFF_WINDOW.0 <= t && t <= PUSHOFF_WINDOW.1
        })
        .map(|p| p.phase),
    })
}

/// Shape checks on the stiffness and damping curves, each with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub grid_n: usize,
    /// Maximum of `K` over the cycle (first occurrence).
    pub stiffness_peak: PhaseValue,
    pub stiffness_at_start: f64,
    /// Peak strictly between heel-strike and the end of stance.
    pub peak_in_stance: bool,
    pub peak_exceeds_start: bool,
    /// `K(peak) / K(0)`, when `K(0) != 0`.
    pub peak_ratio: Option<f64>,
    /// Swing stiffness is a single constant by construction.
    pub swing_constant: bool,
    pub swing_stiffness: f64,
    /// Largest damping in early stance `[0, 0.40)`.
    pub damping_early_max: PhaseValue,
    /// Smallest damping in terminal stance `[0.40, stance_end)`.
    pub damping_terminal_min: Option<PhaseValue>,
    /// Damping at [`TERMINAL_STANCE_PROBE`].
    pub damping_terminal_probe: PhaseValue,
    /// `early max / terminal min`, when the minimum is positive.
    pub damping_ratio: Option<f64>,
    pub damping_early_exceeds_terminal: bool,
}

pub fn trend_report(
    params: &ImpedanceParameters,
    grid_n: usize,
) -> Result<TrendReport, ModelError> {
    if grid_n < 10 {
        return Err(ModelError::GridTooSmall {
            needed: 10,
            got: grid_n,
        });
    }
    let grid = uniform_grid(grid_n);
    let stance_end = params.stance_end();
    let k: Vec<f64> = grid
        .iter()
        .map(|&t| params.stiffness().eval_unchecked(t))
        .collect();
    let d: Vec<f64> = grid
        .iter()
        .map(|&t| params.damping().eval_unchecked(t))
        .collect();

    let stiffness_peak = argmax(&grid, &k, |_| true).expect("grid is non-empty");
    let stiffness_at_start = k[0];
    let early_end = EARLY_STANCE_END.min(stance_end);
    let damping_early_max = argmax(&grid, &d, |t| t < early_end).expect("t = 0 is early stance");
    let neg: Vec<f64> = d.iter().map(|v| -v).collect();
    let damping_terminal_min =
        argmax(&grid, &neg, |t| early_end <= t && t < stance_end).map(|p| PhaseValue {
            phase: p.phase,
            value: -p.value,
        });
    let probe = TERMINAL_STANCE_PROBE;
    let damping_terminal_probe = PhaseValue {
        phase: probe,
        value: params.damping().eval(probe)?,
    };
    let damping_ratio = damping_terminal_min
        .filter(|m| m.value > 0.0)
        .map(|m| damping_early_max.value / m.value);

    Ok(TrendReport {
        grid_n,
        peak_in_stance: stiffness_peak.phase > 0.0 && stiffness_peak.phase < stance_end,
        peak_exceeds_start: stiffness_peak.value > stiffness_at_start,
        peak_ratio: (stiffness_at_start != 0.0).then(|| stiffness_peak.value / stiffness_at_start),
        stiffness_peak,
        stiffness_at_start,
        swing_constant: true,
        swing_stiffness: params.stiffness().swing_value(),
        damping_early_exceeds_terminal: damping_terminal_min
            .is_some_and(|m| damping_early_max.value > m.value),
        damping_early_max,
        damping_terminal_min,
        damping_terminal_probe,
        damping_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub equilibria: Vec<f64>,
    pub trends: TrendReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Grid used for the trend columns of a comparison.
pub const COMPARISON_GRID: usize = 1001;

/// One row per estimate, sorted by schedule label (unlabelled rows sort as
/// `custom`).
pub fn compare_sets(results: &[EstimationResult]) -> Result<ComparisonTable, EstimationError> {
    if results.is_empty() {
        return Err(EstimationError::EmptyComparison);
    }
    let mut rows = results
        .iter()
        .map(|r| {
            Ok(ComparisonRow {
                label: r.label().unwrap_or("custom").to_string(),
                cost: r.cost,
                iterations: r.iterations,
                converged: r.converged,
                feasible: r.constraint_report.feasible(),
                equilibria: r.params.schedule().angles().to_vec(),
                trends: trend_report(&r.params, COMPARISON_GRID)?,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    const HEADER: [&'static str; 9] = [
        "set",
        "cost",
        "iterations",
        "converged",
        "feasible",
        "equilibria_rad",
        "k_peak_phase",
        "k_peak",
        "d_early_gt_terminal",
    ];

    fn cells(&self) -> Vec<[String; 9]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    format!("{:.6}", r.cost),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                    r.feasible.to_string(),
                    r.equilibria
                        .iter()
                        .map(|a| format!("{a:.4}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                    format!("{:.3}", r.trends.stiffness_peak.phase),
                    format!("{:.3}", r.trends.stiffness_peak.value),
                    r.trends.damping_early_exceeds_terminal.to_string(),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::HEADER.join(",");
        out.push('\n');
        for row in self.cells() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Space-aligned plain text.
    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let mut widths: Vec<usize> = Self::HEADER.iter().map(|h| h.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |items: Vec<&str>| {
            let padded: Vec<String> = items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(Self::HEADER.to_vec());
        for row in &cells {
            line(row.iter().map(String::as_str).collect());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_data::JointLabel;
    use crate::impedance::{EquilibriumSchedule, ImpedanceProfile};
    use crate::reference::ReferenceSet;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn identity_tuning() {
        let p = ReferenceSet::C.params();
        assert_eq!(tune(&p, &TuningSpec::scale(1.0, 1.0, 0.0)).unwrap(), p);
    }

    #[test]
    fn set_a_tuned_start_stiffness() {
        let tuned = tune(
            &ReferenceSet::A.params(),
            &TuningSpec::scale(0.4, 0.2, 20.0),
        )
        .unwrap();
        assert_abs_diff_eq!(
            tuned.stiffness().eval(0.0).unwrap(),
            20.884,
            epsilon = 1e-12
        );
        assert_eq!(
            tuned.stiffness().swing_value(),
            tuned.stiffness().coeffs()[0]
        );
    }

    #[test]
    fn tuned_angles_replace_schedule() {
        let tuned = tune(&ReferenceSet::B.params(), &ReferenceSet::B.tuning()).unwrap();
        assert_eq!(tuned.schedule().angles(), &[-0.1745, -0.2617, 0.0000]);
        let bad = TuningSpec {
            tuned_angles: Some(vec![0.0]),
            ..ReferenceSet::B.tuning()
        };
        assert!(tune(&ReferenceSet::B.params(), &bad).is_err());
        assert!(tune(
            &ReferenceSet::B.params(),
            &TuningSpec::scale(-1.0, 1.0, 0.0)
        )
        .is_err());
    }

    fn sine_data() -> GaitCycleData {
        let phase = uniform_grid(1001);
        let n = phase.len();
        let torque: Vec<f64> = phase.iter().map(|t| (2.0 * PI * t).sin()).collect();
        GaitCycleData::new(
            phase,
            vec![0.0; n],
            vec![1.0; n],
            torque,
            JointLabel::Other,
            "",
        )
        .unwrap()
    }

    #[test]
    fn exact_model_has_zero_rmse() {
        let d = sine_data();
        let p = ReferenceSet::D.params();
        let d = d.with_torque(p.torque_trajectory(&d).unwrap()).unwrap();
        assert_eq!(metrics(&p, &d).unwrap().rmse, 0.0);
    }

    #[test]
    fn sine_power_peak() {
        // K = 1 about zero with angle sin(2 pi t) and unit velocity: tau = power = sin(2 pi t)
        let sine = sine_data();
        let p = ImpedanceParameters::new(
            ImpedanceProfile::constant(1.0, 0.63).unwrap(),
            ImpedanceProfile::constant(0.0, 0.63).unwrap(),
            EquilibriumSchedule::new(vec![0.0, 1.0], vec![0.0], None).unwrap(),
        )
        .unwrap();
        let kin = GaitCycleData::new(
            sine.phase().to_vec(),
            sine.torque().to_vec(),
            vec![1.0; sine.len()],
            sine.torque().to_vec(),
            JointLabel::Other,
            "",
        )
        .unwrap();
        let m = metrics(&p, &kin).unwrap();
        assert_abs_diff_eq!(m.peak_power.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.peak_power.phase, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(m.peak_torque.phase, 0.25, epsilon = 1e-12);
        assert_eq!(m.rmse, 0.0);
        // sin(2 pi t) keeps falling across the window, so generation peaks at its end
        assert_abs_diff_eq!(m.pushoff_phase.unwrap(), 0.70, epsilon = 1e-12);
    }

    #[test]
    fn set_c_stiffness_trend() {
        let r = trend_report(&ReferenceSet::C.params(), 1001).unwrap();
        assert!(r.stiffness_peak.phase > 0.3 && r.stiffness_peak.phase < 0.63);
        assert!(r.peak_in_stance && r.peak_exceeds_start);
        assert!(r.swing_constant);
        assert_eq!(r.swing_stiffness, 0.75);
    }

    #[test]
    fn constant_profiles_have_flat_trends() {
        let p = ImpedanceParameters::new(
            ImpedanceProfile::constant(5.0, 0.63).unwrap(),
            ImpedanceProfile::constant(2.0, 0.63).unwrap(),
            EquilibriumSchedule::new(vec![0.0, 1.0], vec![0.0], None).unwrap(),
        )
        .unwrap();
        let r = trend_report(&p, 101).unwrap();
        assert_eq!(r.peak_ratio, Some(1.0));
        assert!(!r.peak_in_stance);
        assert!(!r.peak_exceeds_start);
        assert!(!r.damping_early_exceeds_terminal);
        assert_eq!(r.damping_ratio, Some(1.0));
        assert!(trend_report(&p, 9).is_err());
    }

    #[test]
    fn set_a_damping_falls_off() {
        let p = ReferenceSet::A.params();
        let early = p.damping().eval(0.13).unwrap();
        let late = p.damping().eval(0.55).unwrap();
        assert!(early > late, "{early} vs {late}");
        let r = trend_report(&p, 1001).unwrap();
        assert!(r.damping_early_exceeds_terminal);
        assert!(r.damping_early_max.value > r.damping_terminal_probe.value);
    }
}
