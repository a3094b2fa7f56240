#![allow(dead_code)]

use gait_impedance::{
    load_gait_csv, synthesize, CsvSchema, EquilibriumSchedule, GaitCycleData, ImpedanceParameters,
    ImpedanceProfile, SyntheticSpec,
};
use rand::Rng;

pub fn bundled(name: &str) -> GaitCycleData {
    let path = format!(
        "{}/../../data/{name}_representative.csv",
        env!("CARGO_MANIFEST_DIR")
    );
    load_gait_csv(path, &CsvSchema::default()).expect("bundled data loads")
}

pub fn ankle() -> GaitCycleData {
    bundled("ankle")
}

/// Random order-`m` profile, shifted so its stance minimum is `floor`.
pub fn random_profile<R: Rng>(
    rng: &mut R,
    order: usize,
    spread: f64,
    floor: f64,
) -> ImpedanceProfile {
    let mut c: Vec<f64> = (0..=order)
        .map(|_| rng.random_range(-spread..spread))
        .collect();
    let p = ImpedanceProfile::new(c.clone(), 0.63).unwrap();
    let min = (0..630)
        .map(|i| p.polynomial(i as f64 / 1000.0))
        .fold(f64::INFINITY, f64::min);
    c[0] += floor - min;
    ImpedanceProfile::new(c, 0.63).unwrap()
}

/// Ground truth that satisfies the positivity constraints with margin.
pub fn random_truth<R: Rng>(
    rng: &mut R,
    boundaries: Vec<f64>,
    order: usize,
) -> ImpedanceParameters {
    let sections = boundaries.len() - 1;
    let angles = (0..sections).map(|_| rng.random_range(-0.4..0.4)).collect();
    let k_floor = rng.random_range(1.0..20.0);
    let d_floor = rng.random_range(0.01..0.5);
    ImpedanceParameters::new(
        random_profile(rng, order, 60.0, k_floor),
        random_profile(rng, order, 2.0, d_floor),
        EquilibriumSchedule::new(boundaries, angles, None).unwrap(),
    )
    .unwrap()
}

pub fn synthetic(truth: &ImpedanceParameters) -> GaitCycleData {
    synthesize(&SyntheticSpec {
        ground_truth: truth.clone(),
        kinematics: ankle(),
        noise_std: 0.0,
        seed: 0,
    })
    .unwrap()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
