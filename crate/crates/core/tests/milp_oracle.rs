mod common;

use common::milp::*;
use proptest::prelude::*;
use stlrelax::milp::{solve, Relation, SolverConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mixed_instances_match_enumeration(inst in instance(3, 6)) {
        check(&inst).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn pure_binary_instances_match_enumeration(inst in instance(0, 12)) {
        check(&inst).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn knapsack_optimum_by_enumeration() {
    let inst = Instance {
        n_cont: 0,
        n_bin: 3,
        lo: vec![],
        hi: vec![],
        rows: vec![(vec![2.0, 3.0, 1.0], Relation::Le, 4.0)],
        obj: vec![4.0, 5.0, 3.0],
        maximize: true,
    };
    assert_eq!(oracle(&inst), Oracle::Optimal(8.0));
    let sol = solve(&build(&inst), &SolverConfig::default()).unwrap();
    assert_eq!(sol.values, vec![0.0, 1.0, 1.0]);
}
