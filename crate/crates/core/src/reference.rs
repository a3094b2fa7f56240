//! Published ankle impedance sets used as fixtures.
//!
//! Four equilibrium sectionings of the gait cycle (A: four sections through
//! heel-strike, foot-drop, heel-off and toe-off; D: a single equilibrium),
//! together with their fitted order-4 stiffness/damping coefficients, the
//! fitted equilibrium angles, and the hand-tuned angles and scale factors
//! used on hardware. Angles are radians; coefficients carry no units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::impedance::{
    EquilibriumSchedule, ImpedanceParameters, ImpedanceProfile, DEFAULT_STANCE_END,
};
use crate::tuning::TuningSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReferenceSet {
    A,
    B,
    C,
    D,
}

impl ReferenceSet {
    pub const ALL: [ReferenceSet; 4] = [
        ReferenceSet::A,
        ReferenceSet::B,
        ReferenceSet::C,
        ReferenceSet::D,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReferenceSet::A => "A",
            ReferenceSet::B => "B",
            ReferenceSet::C => "C",
            ReferenceSet::D => "D",
        }
    }

    pub fn boundaries(self) -> Vec<f64> {
        match self {
            ReferenceSet::A => vec![0.0, 0.13, 0.40, 0.63, 1.0],
            ReferenceSet::B => vec![0.0, 0.40, 0.63, 1.0],
            ReferenceSet::C => vec![0.0, 0.63, 1.0],
            ReferenceSet::D => vec![0.0, 1.0],
        }
    }

    pub fn optimized_angles(self) -> Vec<f64> {
        match self {
            ReferenceSet::A => vec![0.0294, -0.3428, -0.3491, 0.3029],
            ReferenceSet::B => vec![-0.4258, -0.4363, 0.0000],
            ReferenceSet::C => vec![-0.4363, 0.1453],
            ReferenceSet::D => vec![-0.4655],
        }
    }

    pub fn tuned_angles(self) -> Vec<f64> {
        match self {
            ReferenceSet::A => vec![0.0100, -0.0875, -0.3490, 0.0873],
            ReferenceSet::B => vec![-0.1745, -0.2617, 0.0000],
            ReferenceSet::C => vec![-0.2617, 0.1452],
            ReferenceSet::D => vec![-0.2617],
        }
    }

    /// `k4, k3, k2, k1, k0`
    pub fn stiffness_descending(self) -> [f64; 5] {
        match self {
            ReferenceSet::A => [-29870.57, 28322.46, -7061.82, 586.04, 2.21],
            ReferenceSet::B => [-19977.92, 17340.71, -3424.51, 199.97, 0.32],
            ReferenceSet::C => [-19822.71, 17146.19, -3333.05, 181.16, 0.75],
            ReferenceSet::D => [-16520.32, 14144.17, -2596.67, 136.56, 0.00],
        }
    }

    /// `d4, d3, d2, d1, d0`
    pub fn damping_descending(self) -> [f64; 5] {
        match self {
            ReferenceSet::A => [-22.45, 88.08, -76.20, 18.76, 0.12],
            ReferenceSet::B => [-140.21, 261.35, -158.46, 31.21, 0.12],
            ReferenceSet::C => [-164.32, 303.05, -181.22, 35.04, 0.18],
            ReferenceSet::D => [-171.23, 311.36, -182.97, 34.53, 0.26],
        }
    }

    pub fn stiffness(self) -> ImpedanceProfile {
        ImpedanceProfile::from_descending(&self.stiffness_descending(), DEFAULT_STANCE_END)
            .expect("fixture coefficients are finite")
    }

    pub fn damping(self) -> ImpedanceProfile {
        ImpedanceProfile::from_descending(&self.damping_descending(), DEFAULT_STANCE_END)
            .expect("fixture coefficients are finite")
    }

    pub fn schedule(self) -> EquilibriumSchedule {
        EquilibriumSchedule::new(
            self.boundaries(),
            self.optimized_angles(),
            Some(self.label().into()),
        )
        .expect("fixture schedule is valid")
    }

    /// Fitted profiles with the fitted equilibria.
    pub fn params(self) -> ImpedanceParameters {
        ImpedanceParameters::new(self.stiffness(), self.damping(), self.schedule())
            .expect("fixture profiles share a stance end")
    }

    /// Hardware tuning: alpha 0.4 / beta 0.2 for A, 0.5 / 0.166 otherwise,
    /// gamma 20 throughout, with the tuned equilibria.
    pub fn tuning(self) -> TuningSpec {
        let (alpha, beta) = match self {
            ReferenceSet::A => (0.4, 0.2),
            _ => (0.5, 0.166),
        };
        TuningSpec {
            alpha,
            beta,
            gamma: 20.0,
            tuned_angles: Some(self.tuned_angles()),
        }
    }
}

impl fmt::Display for ReferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReferenceSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ReferenceSet::A),
            "B" => Ok(ReferenceSet::B),
            "C" => Ok(ReferenceSet::C),
            "D" => Ok(ReferenceSet::D),
            _ => Err(format!("unknown set `{s}` (expected A, B, C or D)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_terms_survive_reversal() {
        let k0 = [2.21, 0.32, 0.75, 0.00];
        let d0 = [0.12, 0.12, 0.18, 0.26];
        for (i, set) in ReferenceSet::ALL.into_iter().enumerate() {
            assert_eq!(set.stiffness().coeffs()[0], k0[i]);
            assert_eq!(set.damping().coeffs()[0], d0[i]);
            assert_eq!(set.stiffness().coeffs()[4], set.stiffness_descending()[0]);
            assert_eq!(set.schedule().section_count(), set.optimized_angles().len());
            assert_eq!(set.tuned_angles().len(), set.optimized_angles().len());
        }
    }

    #[test]
    fn parse_labels() {
        assert_eq!("b".parse::<ReferenceSet>().unwrap(), ReferenceSet::B);
        assert!("E".parse::<ReferenceSet>().is_err());
    }
}
