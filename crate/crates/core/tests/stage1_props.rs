mod common;

use common::toys::{analytic, delta_min};
use proptest::prelude::*;
use stlrelax::dynamics::{linearize, rollout, ControlInput, VehicleParams, VehicleState};
use stlrelax::stage1::{
    restore_feasibility, solve_nominal, MpcProblem, NamedFormula,
    NominalObjective, RelaxationStatus, SpecSet, Stage1Options, StateBounds,
};
use stlrelax::stl::{robustness, Formula, TimeGrid};

#[test]
fn conflicting_pair_needs_two() {
    assert!((delta_min(&[5.0], &[3.0]) - 2.0).abs() < 1e-6);
    // grid search over x agrees
    let grid_best = (0..=800)
        .map(|i| i as f64 * 0.01)
        .map(|x| (5.0 - x).max(0.0) + (x - 3.0).max(0.0))
        .fold(f64::INFINITY, f64::min);
    assert!((grid_best - 2.0).abs() < 1e-9);
}

#[test]
fn compatible_specs_need_nothing() {
    assert_eq!(delta_min(&[2.0], &[6.0]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn random_interval_toys_match_analytic(
        lows in proptest::collection::vec(0i32..=16, 1..=3),
        highs in proptest::collection::vec(0i32..=16, 1..=3),
    ) {
        let lows: Vec<f64> = lows.into_iter().map(|v| v as f64 * 0.5).collect();
        let highs: Vec<f64> = highs.into_iter().map(|v| v as f64 * 0.5).collect();
        let got = delta_min(&lows, &highs);
        let want = analytic(&lows, &highs);
        prop_assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    }
}

fn vehicle_problem(x0: VehicleState) -> MpcProblem {
    let grid = TimeGrid::new(0.2, 11).unwrap();
    let params = VehicleParams::default();
    let us = vec![ControlInput::default(); 10];
    let xs = rollout(&x0, &us, grid.dt, &params);
    MpcProblem {
        grid,
        x0,
        params,
        linear_model: linearize(&xs, &us, grid.dt, &params),
        state_bounds: StateBounds { px: [-50.0, 50.0], py: [-20.0, 20.0], theta: [-1.0, 1.0] },
        objective: NominalObjective::default(),
        exogenous: None,
    }
}

fn spec(name: &str, text: &str) -> NamedFormula {
    NamedFormula::new(name, text.parse::<Formula>().unwrap())
}

#[test]
fn unconstrained_vehicle_at_rest_stays_put() {
    let prob = vehicle_problem(VehicleState::default());
    let res = solve_nominal(&prob, &SpecSet::default(), &Stage1Options::default()).unwrap().unwrap();
    assert!(res.cost.abs() < 1e-9);
    assert!(res.u.iter().all(|u| u.a.abs() < 1e-9 && u.beta.abs() < 1e-9));
}

#[test]
fn satisfiable_speed_spec_is_feasible() {
    let prob = vehicle_problem(VehicleState::new(0.0, 0.0, 0.0, 3.0));
    let specs = SpecSet::new(vec![], vec![spec("moving", "G[0,2](v >= 0)")]).unwrap();
    assert!(solve_nominal(&prob, &specs, &Stage1Options::default()).unwrap().is_some());
    let relaxed = restore_feasibility(&prob, &specs, &Stage1Options::default()).unwrap();
    assert_eq!(relaxed.status, RelaxationStatus::FeasibleStrict);
    assert_eq!(relaxed.delta_min, 0.0);
}

#[test]
fn violated_hard_spec_at_start_is_hard_infeasible() {
    let prob = vehicle_problem(VehicleState::new(1.0, 0.0, 0.0, 0.0));
    let specs = SpecSet::new(vec![spec("stay_left", "G[0,2](px <= 0)")], vec![]).unwrap();
    let res = restore_feasibility(&prob, &specs, &Stage1Options::default()).unwrap();
    assert_eq!(res.status, RelaxationStatus::HardInfeasible);
}

#[test]
fn conflicting_vehicle_specs_relax_minimally() {
    // moving at 5 m/s: cannot both stop before x = 2 and keep speed above 4
    let prob = vehicle_problem(VehicleState::new(0.0, 0.0, 0.0, 5.0));
    let specs = SpecSet::new(
        vec![spec("lane", "G[0,2](py <= 1 and py >= -1)")],
        vec![spec("fast", "G[0,2](v >= 4)"), spec("short", "G[0,2](px <= 2)")],
    )
    .unwrap();
    assert!(solve_nominal(&prob, &specs, &Stage1Options::default()).unwrap().is_none());
    let res = restore_feasibility(&prob, &specs, &Stage1Options::default()).unwrap();
    assert_eq!(res.status, RelaxationStatus::FeasibleRelaxed);
    assert!(res.delta_min > 0.0);
    let total: f64 = res.delta_star.iter().map(|(_, d)| d).sum();
    assert!((total - res.delta_min).abs() < 1e-9);

    let trace = trace_of(&prob, &res.x_star);
    for f in specs.hard() {
        assert!(robustness(&f.formula, &trace, 0).unwrap() >= -1e-6);
    }
    for (f, (_, d)) in specs.soft().iter().zip(&res.delta_star) {
        assert!(robustness(&f.formula, &trace, 0).unwrap() >= -d - 1e-6);
    }
}

fn trace_of(prob: &MpcProblem, xs: &[VehicleState]) -> stlrelax::stl::Trace {
    let col = |i: usize| xs.iter().map(|x| x.to_array()[i]).collect::<Vec<_>>();
    stlrelax::stl::Trace::from_columns(prob.grid, vec![("px", col(0)), ("py", col(1)), ("theta", col(2)), ("v", col(3))]).unwrap()
}
