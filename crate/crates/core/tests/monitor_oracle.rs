mod common;

use common::{brute_rho, capped_formula_and_trace, formula, interval, trace};
use proptest::prelude::*;
use stlrelax::stl::{parse_formula, robustness, satisfies, Formula, Trace};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_brute_force((f, tr) in capped_formula_and_trace(4, 20)) {
        let got = robustness(&f, &tr, 0).ok();
        let want = brute_rho(&f, &tr, 0);
        match (got, want) {
            (Some(g), Some(w)) => {
                prop_assert!(g == w || (g.is_nan() && w.is_nan()), "{f}: {g} vs {w}");
                prop_assert_eq!(satisfies(&f, &tr, 0).unwrap(), w >= 0.0);
            }
            (None, None) => {}
            (g, w) => prop_assert!(false, "{f}: library {g:?}, oracle {w:?}"),
        }
    }
}

fn eval_pair(f: &Formula, g: &Formula, tr: &Trace) -> Option<(f64, f64)> {
    Some((robustness(f, tr, 0).ok()?, robustness(g, tr, 0).ok()?))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn double_negation(f in formula(3), tr in trace(12)) {
        if let Some((x, y)) = eval_pair(&Formula::not(Formula::not(f.clone())), &f, &tr) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn de_morgan(f in formula(2), g in formula(2), tr in trace(12)) {
        let lhs = Formula::not(Formula::and(f.clone(), g.clone()));
        let rhs = Formula::or(Formula::not(f), Formula::not(g));
        if let Some((x, y)) = eval_pair(&lhs, &rhs, &tr) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn temporal_duality(iv in interval(), f in formula(2), tr in trace(12)) {
        let lhs = Formula::not(Formula::always(iv, f.clone()));
        let rhs = Formula::eventually(iv, Formula::not(f));
        if let Some((x, y)) = eval_pair(&lhs, &rhs, &tr) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn nnf_preserves_robustness(f in formula(3), tr in trace(12)) {
        if let Some((x, y)) = eval_pair(&f.to_nnf(), &f, &tr) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn print_parse_fixed_point(f in formula(4)) {
        let text = f.to_string();
        let back = parse_formula(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
    }
}

#[test]
fn nested_example_parses() {
    let f = parse_formula("F[0,10](G[0,5](s - 3 >= 0))").unwrap();
    assert_eq!(f.to_string(), "F[0,10](G[0,5](s - 3 >= 0))");
}
