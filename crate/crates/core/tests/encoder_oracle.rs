mod common;

use common::capped_formula_and_trace;
use proptest::prelude::*;
use stlrelax::milp::{
    encode_max, encode_min, encode_robustness, solve, Encoded, LinExpr, Model, MilpError, Polarity, Relation,
    RobustnessEncoder, Sense, SignalTable, SolveStatus, SolverConfig, VarRef,
};
use stlrelax::stl::{robustness, Formula, Trace};

fn pinned(tr: &Trace) -> (Model, SignalTable) {
    let mut m = Model::new();
    let mut table = SignalTable::new(tr.grid());
    for name in tr.dims() {
        let col = tr.column(name).unwrap();
        let vars: Vec<VarRef> = (0..tr.len())
            .map(|k| m.add_continuous(-10.0, 10.0, format!("{name}{k}")).unwrap())
            .collect();
        for (v, x) in vars.iter().zip(&col) {
            m.add_constraint(*v, Relation::Eq, *x).unwrap();
        }
        table.insert_vars(name.clone(), &vars).unwrap();
    }
    (m, table)
}

fn optimize(m: &mut Model, e: LinExpr, sense: Sense) -> f64 {
    m.set_objective(sense, e.clone()).unwrap();
    let s = solve(m, &SolverConfig::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    s.eval(&e)
}

fn finite_case(f: &Formula, tr: &Trace) -> Option<f64> {
    robustness(f, tr, 0).ok().filter(|v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn exact_encoding_matches_monitor((f, tr) in capped_formula_and_trace(3, 8)) {
        let Some(want) = finite_case(&f, &tr) else { return Ok(()) };
        let (mut m, table) = pinned(&tr);
        let r = encode_robustness(&mut m, &f, &table, 0, &SolverConfig::default()).unwrap();
        let hi = optimize(&mut m, r.into(), Sense::Maximize);
        let lo = optimize(&mut m, r.into(), Sense::Minimize);
        prop_assert!((hi - want).abs() <= 1e-6, "{f}: max {hi} vs {want}");
        prop_assert!((lo - want).abs() <= 1e-6, "{f}: min {lo} vs {want}");
    }

    #[test]
    fn lower_bound_encoding_reaches_monitor((f, tr) in capped_formula_and_trace(3, 8)) {
        let Some(want) = finite_case(&f, &tr) else { return Ok(()) };
        let (mut m, table) = pinned(&tr);
        let mut enc = RobustnessEncoder::new(table, SolverConfig::default(), Polarity::LowerBound);
        let Encoded::Expr(e) = enc.encode(&mut m, &f, 0).unwrap() else { panic!("finite value") };
        let hi = optimize(&mut m, e, Sense::Maximize);
        prop_assert!((hi - want).abs() <= 1e-6, "{f}: {hi} vs {want}");
    }

    #[test]
    fn min_and_max_of_random_affine_exprs(
        coeffs in proptest::collection::vec((-3i32..=3, -3i32..=3, -5i32..=5), 1..=5),
    ) {
        let cfg = SolverConfig::default();
        for maximize_r in [true, false] {
            let mut m = Model::new();
            let x = m.add_continuous(-2.0, 2.0, "x").unwrap();
            let y = m.add_continuous(-2.0, 2.0, "y").unwrap();
            let exprs: Vec<LinExpr> = coeffs
                .iter()
                .map(|&(a, b, c)| LinExpr::term(x, a as f64) + LinExpr::term(y, b as f64) + c as f64)
                .collect();
            let r = if maximize_r { encode_min(&mut m, &exprs, &cfg) } else { encode_max(&mut m, &exprs, &cfg) }.unwrap();
            m.set_objective(if maximize_r { Sense::Maximize } else { Sense::Minimize }, r).unwrap();
            let s = solve(&m, &cfg).unwrap();
            prop_assert_eq!(s.status, SolveStatus::Optimal);
            let vals: Vec<f64> = exprs.iter().map(|e| s.eval(e)).collect();
            let want = if maximize_r {
                vals.iter().cloned().fold(f64::INFINITY, f64::min)
            } else {
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            prop_assert!((s.value(r) - want).abs() <= 1e-6, "{} vs {}", s.value(r), want);
        }
    }
}

#[test]
fn predicate_encoding_needs_no_binaries() {
    let tr = Trace::from_columns(stlrelax::stl::TimeGrid::new(0.2, 2).unwrap(), vec![("v", vec![3.0, 1.0])]).unwrap();
    let (mut m, table) = pinned(&tr);
    let f: Formula = "v - 1 >= 0".parse().unwrap();
    let r = encode_robustness(&mut m, &f, &table, 0, &SolverConfig::default()).unwrap();
    assert_eq!(m.num_binaries(), 0);
    assert!((optimize(&mut m, r.into(), Sense::Maximize) - 2.0).abs() < 1e-9);
}

#[test]
fn encoded_ranges_stay_within_big_m() {
    // every gadget row must fit the configured constant; unbounded inputs are refused
    let tr = Trace::from_columns(stlrelax::stl::TimeGrid::new(0.2, 3).unwrap(), vec![("v", vec![0.0; 3])]).unwrap();
    let mut m = Model::new();
    let mut table = SignalTable::new(tr.grid());
    let free: Vec<VarRef> = (0..3).map(|k| m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("v{k}")).unwrap()).collect();
    table.insert_vars("v", &free).unwrap();
    let f: Formula = "F[0,0.4](v >= 0)".parse().unwrap();
    let err = encode_robustness(&mut m, &f, &table, 0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, MilpError::BigMExceeded { .. }));
}
