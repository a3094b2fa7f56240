//! Phase-varying impedance: stiffness and damping profiles, the equilibrium
//! schedule, and the torque law `tau = K(t) (theta - theta_eq(t)) + D(t) theta_dot`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::gait_data::{uniform_grid, GaitCycleData};

/// Default stance/swing boundary as a fraction of the gait cycle.
pub const DEFAULT_STANCE_END: f64 = 0.63;

/// Tolerance used when a validation report decides satisfied/violated.
pub const FEASIBILITY_TOL: f64 = 1e-9;

fn check_phase(t: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(ModelError::PhaseOutOfRange(t))
    }
}

/// Stiffness or damping over the cycle: a polynomial in phase during stance
/// and a constant during swing. The swing constant always equals the
/// polynomial's constant term so the profile repeats cleanly across cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct ImpedanceProfile {
    coeffs: Vec<f64>,
    stance_end: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    coeffs: Vec<f64>,
    swing: f64,
    stance_end: f64,
}

impl TryFrom<ProfileRepr> for ImpedanceProfile {
    type Error = ModelError;

    fn try_from(r: ProfileRepr) -> Result<Self, Self::Error> {
        ImpedanceProfile::with_swing(r.coeffs, r.swing, r.stance_end)
    }
}

impl From<ImpedanceProfile> for ProfileRepr {
    fn from(p: ImpedanceProfile) -> Self {
        ProfileRepr {
            swing: p.swing_value(),
            coeffs: p.coeffs,
            stance_end: p.stance_end,
        }
    }
}

impl ImpedanceProfile {
    /// Ascending-power coefficients `c0 + c1 t + ... + cm t^m`.
    pub fn new(coeffs: Vec<f64>, stance_end: f64) -> Result<Self, ModelError> {
        if coeffs.is_empty() {
            return Err(ModelError::EmptyProfile);
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient(i));
        }
        if !(stance_end > 0.0 && stance_end < 1.0) {
            return Err(ModelError::StanceEnd(stance_end));
        }
        Ok(Self { coeffs, stance_end })
    }

    /// Like [`new`](Self::new) but with an explicit swing value, which must
    /// equal `coeffs[0]` exactly.
    pub fn with_swing(coeffs: Vec<f64>, swing: f64, stance_end: f64) -> Result<Self, ModelError> {
        let profile = Self::new(coeffs, stance_end)?;
        if swing != profile.coeffs[0] {
            return Err(ModelError::SwingMismatch {
                swing,
                c0: profile.coeffs[0],
            });
        }
        Ok(profile)
    }

    /// Highest power first, as coefficient tables are usually printed.
    pub fn from_descending(coeffs: &[f64], stance_end: f64) -> Result<Self, ModelError> {
        Self::new(coeffs.iter().rev().copied().collect(), stance_end)
    }

    pub fn constant(value: f64, stance_end: f64) -> Result<Self, ModelError> {
        Self::new(vec![value], stance_end)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn swing_value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn stance_end(&self) -> f64 {
        self.stance_end
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Stance polynomial at any `t`, ignoring the swing switch.
    pub fn polynomial(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        check_phase(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        if t < self.stance_end {
            self.polynomial(t)
        } else {
            self.swing_value()
        }
    }

    pub(crate) fn map_coeffs(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self, ModelError> {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| f(i, c))
                .collect(),
            self.stance_end,
        )
    }
}

/// Piecewise-constant equilibrium angle over gait sections `[b_i, b_{i+1})`,
/// with the last section closed at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr")]
pub struct EquilibriumSchedule {
    boundaries: Vec<f64>,
    angles: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Deserialize)]
struct ScheduleRepr {
    boundaries: Vec<f64>,
    angles: Vec<f64>,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<ScheduleRepr> for EquilibriumSchedule {
    type Error = ModelError;

    fn try_from(r: ScheduleRepr) -> Result<Self, Self::Error> {
        EquilibriumSchedule::new(r.boundaries, r.angles, r.label)
    }
}

pub(crate) fn check_boundaries(boundaries: &[f64]) -> Result<(), ModelError> {
    let ok = boundaries.len() >= 2
        && boundaries[0] == 0.0
        && boundaries[boundaries.len() - 1] == 1.0
        && boundaries.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(ModelError::Boundaries(boundaries.to_vec()))
    }
}

/// Section containing `t` under the half-open convention.
pub(crate) fn section_index(boundaries: &[f64], t: f64) -> usize {
    let sections = boundaries.len() - 1;
    let k = boundaries.partition_point(|&b| b <= t);
    k.saturating_sub(1).min(sections - 1)
}

impl EquilibriumSchedule {
    pub fn new(
        boundaries: Vec<f64>,
        angles: Vec<f64>,
        label: Option<String>,
    ) -> Result<Self, ModelError> {
        check_boundaries(&boundaries)?;
        if angles.len() != boundaries.len() - 1 {
            return Err(ModelError::AngleCount {
                sections: boundaries.len() - 1,
                angles: angles.len(),
            });
        }
        if let Some(i) = angles.iter().position(|a| !a.is_finite()) {
            return Err(ModelError::NonFiniteAngle(i));
        }
        Ok(Self {
            boundaries,
            angles,
            label,
        })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn section_count(&self) -> usize {
        self.angles.len()
    }

    pub fn section_of(&self, t: f64) -> Result<usize, ModelError> {
        check_phase(t)?;
        Ok(section_index(&self.boundaries, t))
    }

    pub fn equilibrium_at(&self, t: f64) -> Result<f64, ModelError> {
        Ok(self.angles[self.section_of(t)?])
    }

    pub fn with_angles(&self, angles: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.boundaries.clone(), angles, self.label.clone())
    }
}

/// A complete impedance controller description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr")]
pub struct ImpedanceParameters {
    stiffness: ImpedanceProfile,
    damping: ImpedanceProfile,
    schedule: EquilibriumSchedule,
}

#[derive(Deserialize)]
struct ParamsRepr {
    stiffness: ImpedanceProfile,
    damping: ImpedanceProfile,
    schedule: EquilibriumSchedule,
}

impl TryFrom<ParamsRepr> for ImpedanceParameters {
    type Error = ModelError;

    fn try_from(r: ParamsRepr) -> Result<Self, Self::Error> {
        ImpedanceParameters::new(r.stiffness, r.damping, r.schedule)
    }
}

impl ImpedanceParameters {
    pub fn new(
        stiffness: ImpedanceProfile,
        damping: ImpedanceProfile,
        schedule: EquilibriumSchedule,
    ) -> Result<Self, ModelError> {
        if stiffness.stance_end != damping.stance_end {
            return Err(ModelError::StanceEndMismatch {
                stiffness: stiffness.stance_end,
                damping: damping.stance_end,
            });
        }
        Ok(Self {
            stiffness,
            damping,
            schedule,
        })
    }

    pub fn stiffness(&self) -> &ImpedanceProfile {
        &self.stiffness
    }

    pub fn damping(&self) -> &ImpedanceProfile {
        &self.damping
    }

    pub fn schedule(&self) -> &EquilibriumSchedule {
        &self.schedule
    }

    pub fn stance_end(&self) -> f64 {
        self.stiffness.stance_end
    }

    pub fn impedance_torque(&self, angle: f64, velocity: f64, t: f64) -> Result<f64, ModelError> {
        check_phase(t)?;
        Ok(self.torque_unchecked(angle, velocity, t))
    }

    pub(crate) fn torque_unchecked(&self, angle: f64, velocity: f64, t: f64) -> f64 {
        let k = self.stiffness.eval_unchecked(t);
        let d = self.damping.eval_unchecked(t);
        let eq = self.schedule.angles[section_index(&self.schedule.boundaries, t)];
        k * (angle - eq) + d * velocity
    }

    /// Model torque at every sample of `data`.
    pub fn torque_trajectory(&self, data: &GaitCycleData) -> Result<Vec<f64>, ModelError> {
        data.phase()
            .iter()
            .zip(data.angle())
            .zip(data.velocity())
            .map(|((&t, &a), &v)| self.impedance_torque(a, v, t))
            .collect()
    }

    /// Check sampled positivity and cycle continuity of both profiles.
    pub fn validate(&self, grid_n: usize) -> Result<ValidationReport, ModelError> {
        if grid_n < 2 {
            return Err(ModelError::GridTooSmall {
                needed: 2,
                got: grid_n,
            });
        }
        let grid = uniform_grid(grid_n);
        Ok(ValidationReport {
            grid_n,
            stiffness_positivity: positivity("stiffness >= 0", &self.stiffness, &grid),
            damping_positivity: positivity("damping >= 0", &self.damping, &grid),
            stiffness_continuity: continuity("K(0) = K(1)", &self.stiffness),
            damping_continuity: continuity("D(0) = D(1)", &self.damping),
        })
    }
}

/// Outcome of one constraint check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub satisfied: bool,
    /// Size of the worst violation, zero when none.
    pub worst_violation: f64,
    /// Phase of the worst value (the minimum for positivity checks).
    pub phase: Option<f64>,
    /// The worst raw value observed, e.g. `min K(t)`.
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_n: usize,
    pub stiffness_positivity: ConstraintCheck,
    pub damping_positivity: ConstraintCheck,
    pub stiffness_continuity: ConstraintCheck,
    pub damping_continuity: ConstraintCheck,
}

impl ValidationReport {
    pub fn checks(&self) -> [&ConstraintCheck; 4] {
        [
            &self.stiffness_positivity,
            &self.damping_positivity,
            &self.stiffness_continuity,
            &self.damping_continuity,
        ]
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks().iter().all(|c| c.satisfied)
    }

    pub fn worst_violation(&self) -> f64 {
        self.checks()
            .iter()
            .map(|c| c.worst_violation)
            .fold(0.0, f64::max)
    }
}

fn positivity(name: &str, profile: &ImpedanceProfile, grid: &[f64]) -> ConstraintCheck {
    let (phase, worst_value) = grid.iter().map(|&t| (t, profile.eval_unchecked(t))).fold(
        (0.0, f64::INFINITY),
        |best, cur| if cur.1 < best.1 { cur } else { best },
    );
    let worst_violation = (-worst_value).max(0.0);
    ConstraintCheck {
        name: name.to_string(),
        satisfied: worst_violation <= FEASIBILITY_TOL,
        worst_violation,
        phase: Some(phase),
        worst_value,
    }
}

fn continuity(name: &str, profile: &ImpedanceProfile) -> ConstraintCheck {
    let gap = (profile.eval_unchecked(0.0) - profile.eval_unchecked(1.0)).abs();
    ConstraintCheck {
        name: name.to_string(),
        satisfied: gap == 0.0,
        worst_violation: gap,
        phase: None,
        worst_value: gap,
    }
}

/// Elementwise mechanical power `tau * theta_dot`.
pub fn joint_power(torque: &[f64], velocity: &[f64]) -> Result<Vec<f64>, ModelError> {
    if torque.len() != velocity.len() {
        return Err(ModelError::LengthMismatch(torque.len(), velocity.len()));
    }
    Ok(torque.iter().zip(velocity).map(|(t, v)| t * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ReferenceSet;
    use approx::assert_abs_diff_eq;

    fn constant_params(k: f64, d: f64, eq: f64) -> ImpedanceParameters {
        ImpedanceParameters::new(
            ImpedanceProfile::constant(k, DEFAULT_STANCE_END).unwrap(),
            ImpedanceProfile::constant(d, DEFAULT_STANCE_END).unwrap(),
            EquilibriumSchedule::new(vec![0.0, 1.0], vec![eq], None).unwrap(),
        )
        .unwrap()
    }

    /// Plain power-sum evaluation, independent of the Horner path.
    fn power_sum(desc: &[f64], t: f64) -> f64 {
        let m = desc.len() - 1;
        desc.iter()
            .enumerate()
            .map(|(i, c)| c * t.powi((m - i) as i32))
            .sum()
    }

    #[test]
    fn set_a_stiffness_values() {
        let k = ReferenceSet::A.stiffness();
        assert_eq!(k.eval(0.0).unwrap(), 2.21);
        assert_eq!(k.eval(1.0).unwrap(), 2.21);
        let oracle = power_sum(&ReferenceSet::A.stiffness_descending(), 0.5);
        assert_abs_diff_eq!(oracle, 203.171875, epsilon = 1e-9);
        assert_abs_diff_eq!(k.eval(0.5).unwrap(), 203.17, epsilon = 0.01);
        assert_abs_diff_eq!(k.eval(0.5).unwrap(), oracle, epsilon = 1e-10);
        assert!(k.eval(1.01).is_err());
        assert!(k.eval(-0.01).is_err());
    }

    #[test]
    fn equilibrium_lookup() {
        let a = ReferenceSet::A.schedule();
        assert_eq!(a.equilibrium_at(0.20).unwrap(), -0.3428);
        assert_eq!(a.equilibrium_at(0.40).unwrap(), -0.3491);
        assert_eq!(a.equilibrium_at(0.13).unwrap(), -0.3428);
        assert_eq!(a.equilibrium_at(0.0).unwrap(), 0.0294);
        assert_eq!(a.equilibrium_at(1.0).unwrap(), 0.3029);
        let d = ReferenceSet::D.schedule();
        for t in [0.0, 0.3, 0.63, 1.0] {
            assert_eq!(d.equilibrium_at(t).unwrap(), -0.4655);
        }
        assert!(a.equilibrium_at(1.5).is_err());
    }

    #[test]
    fn torque_law_by_hand() {
        let p = constant_params(10.0, 2.0, 0.0);
        assert_abs_diff_eq!(
            p.impedance_torque(0.1, -0.5, 0.3).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let p = constant_params(10.0, 2.0, 0.25);
        assert_eq!(p.impedance_torque(0.25, 0.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn set_a_torque_at_midstance() {
        let p = ReferenceSet::A.params();
        let expected = 203.171875 * (0.1 + 0.3491);
        let tau = p.impedance_torque(0.1, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(tau, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(tau, 91.24, epsilon = 0.01);
    }

    #[test]
    fn power() {
        assert_eq!(
            joint_power(&[2.0, 3.0], &[0.5, -1.0]).unwrap(),
            vec![1.0, -3.0]
        );
        assert_eq!(
            joint_power(&[0.0, 0.0], &[4.0, -1.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_abs_diff_eq!(
            joint_power(&[91.24], &[0.2]).unwrap()[0],
            18.248,
            epsilon = 1e-12
        );
        assert!(joint_power(&[1.0], &[]).is_err());
    }

    #[test]
    fn validate_negative_constant() {
        let k = ImpedanceProfile::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0], DEFAULT_STANCE_END).unwrap();
        let p = ImpedanceParameters::new(
            k,
            ImpedanceProfile::constant(0.0, DEFAULT_STANCE_END).unwrap(),
            EquilibriumSchedule::new(vec![0.0, 1.0], vec![0.0], None).unwrap(),
        )
        .unwrap();
        let report = p.validate(1001).unwrap();
        assert!(!report.stiffness_positivity.satisfied);
        assert_eq!(report.stiffness_positivity.worst_violation, 1.0);
        assert!(report.damping_positivity.satisfied);
        assert!(report.stiffness_continuity.satisfied);
        assert!(p.validate(1).is_err());
    }

    #[test]
    fn swing_mismatch_rejected() {
        let err = ImpedanceProfile::with_swing(vec![1.0, 2.0], 1.5, 0.63).unwrap_err();
        assert!(matches!(err, ModelError::SwingMismatch { .. }));
        let json = r#"{"coeffs":[1.0,2.0],"swing":1.5,"stance_end":0.63}"#;
        assert!(serde_json::from_str::<ImpedanceProfile>(json).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(ImpedanceProfile::new(vec![], 0.63).is_err());
        assert!(ImpedanceProfile::new(vec![1.0], 1.0).is_err());
        assert!(ImpedanceProfile::new(vec![f64::NAN], 0.5).is_err());
        assert!(EquilibriumSchedule::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 3], None).is_err());
        assert!(EquilibriumSchedule::new(vec![0.1, 1.0], vec![0.0], None).is_err());
        assert!(EquilibriumSchedule::new(vec![0.0, 1.0], vec![0.0, 1.0], None).is_err());
        let k = ImpedanceProfile::constant(1.0, 0.6).unwrap();
        let d = ImpedanceProfile::constant(1.0, 0.63).unwrap();
        let s = EquilibriumSchedule::new(vec![0.0, 1.0], vec![0.0], None).unwrap();
        assert!(ImpedanceParameters::new(k, d, s).is_err());
    }

    #[test]
    fn json_layout_and_round_trip() {
        let p = ReferenceSet::B.params();
        let json = serde_json::to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["stiffness"]["swing"], v["stiffness"]["coeffs"][0]);
        assert_eq!(v["schedule"]["label"], "B");
        assert_eq!(v["damping"]["stance_end"], 0.63);
        let back: ImpedanceParameters = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
