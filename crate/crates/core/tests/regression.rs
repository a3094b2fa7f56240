//! Values on the bundled representative curves, recorded from this pipeline
//! and frozen.

mod common;

use common::ankle;
use gait_impedance::{
    build_problem, compare_sets, fit_cost, metrics, multi_start, PhaseWindow, ProblemOptions,
    ReferenceSet,
};

const SET_A_FIXTURE_COST: f64 = 131.30631856327096;
const SET_A_FIXTURE_RMSE: f64 = 13.065467028001489;

#[test]
fn set_a_fixture_cost_is_frozen() {
    let cost = fit_cost(&ReferenceSet::A.params(), &ankle(), PhaseWindow::FULL).unwrap();
    assert!((cost - SET_A_FIXTURE_COST).abs() <= 1e-9, "{cost:?}");
}

#[test]
fn set_a_fixture_rmse_is_frozen() {
    let m = metrics(&ReferenceSet::A.params(), &ankle()).unwrap();
    assert!(m.rmse < SET_A_FIXTURE_RMSE + 1e-9, "{:?}", m.rmse);
    let n = ankle().len() as f64;
    assert!(
        (m.rmse * m.rmse * n - SET_A_FIXTURE_COST.powi(2)).abs()
            <= 1e-9 * SET_A_FIXTURE_COST.powi(2)
    );
}

#[test]
fn fixture_pushoff_falls_in_terminal_stance() {
    for set in ReferenceSet::ALL {
        let phase = metrics(&set.params(), &ankle())
            .unwrap()
            .pushoff_phase
            .unwrap();
        assert!((0.45..=0.63).contains(&phase), "set {set}: {phase}");
    }
}

#[test]
fn all_sectionings_reach_comparable_costs() {
    let results: Vec<_> = ReferenceSet::ALL
        .iter()
        .rev()
        .map(|&set| {
            multi_start(
                &build_problem(ankle(), set.into(), ProblemOptions::default()).unwrap(),
                8,
                0,
            )
            .unwrap()
        })
        .collect();
    let table = compare_sets(&results).unwrap();
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["A", "B", "C", "D"]);
    assert!(table.rows.iter().all(|r| r.feasible && r.converged));
    let lo = table
        .rows
        .iter()
        .map(|r| r.cost)
        .fold(f64::INFINITY, f64::min);
    let hi = table.rows.iter().map(|r| r.cost).fold(0.0, f64::max);
    assert!(hi <= 2.0 * lo, "costs {lo} .. {hi}");
    // more sections can only help on the same data
    assert!(table.rows[0].cost <= table.rows[3].cost);
}
