#![allow(dead_code)]

pub mod milp;
pub mod toys;

use proptest::prelude::*;
use stlrelax::stl::{Formula, Interval, Predicate, TimeGrid, Trace};

pub const DT: f64 = 0.2;
pub const DIMS: [&str; 2] = ["a", "b"];

pub fn predicate() -> impl Strategy<Value = Formula> {
    (-3i32..=3, -3i32..=3, -4i32..=4).prop_map(|(ca, cb, off)| {
        let p = Predicate::new([("a", ca as f64), ("b", cb as f64)], off as f64 * 0.5).unwrap();
        if p.is_constant() {
            Formula::pred(Predicate::ge("a", off as f64 * 0.5))
        } else {
            Formula::pred(p)
        }
    })
}

/// Intervals on a half-step lattice, so some endpoints fall between samples.
pub fn interval() -> impl Strategy<Value = Interval> {
    (0u32..=6, 0u32..=6).prop_map(|(a, w)| {
        let a = a as f64 * DT * 0.5;
        Interval::new(a, a + w as f64 * DT * 0.5).unwrap()
    })
}

pub fn formula(depth: u32) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![9 => predicate(), 1 => Just(Formula::True)];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (interval(), inner.clone()).prop_map(|(iv, f)| Formula::always(iv, f)),
            (interval(), inner).prop_map(|(iv, f)| Formula::eventually(iv, f)),
        ]
    })
}

/// Longest time offset any temporal operator can reach from sample 0.
pub fn reach(f: &Formula) -> f64 {
    match f {
        Formula::True | Formula::Pred(_) => 0.0,
        Formula::Not(g) => reach(g),
        Formula::And(a, b) | Formula::Or(a, b) => reach(a).max(reach(b)),
        Formula::Always(iv, g) | Formula::Eventually(iv, g) => iv.b() + reach(g),
    }
}

pub fn trace(steps: usize) -> impl Strategy<Value = Trace> {
    proptest::collection::vec((-20i32..=20, -20i32..=20), steps).prop_map(move |rows| {
        let grid = TimeGrid::new(DT, rows.len()).unwrap();
        let a: Vec<f64> = rows.iter().map(|r| r.0 as f64 * 0.25).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.1 as f64 * 0.25).collect();
        Trace::from_columns(grid, vec![("a", a), ("b", b)]).unwrap()
    })
}

pub fn formula_and_trace(depth: u32, max_steps: usize) -> impl Strategy<Value = (Formula, Trace)> {
    (formula(depth), 1usize..=max_steps).prop_flat_map(|(f, steps)| {
        let need = (reach(&f) / DT + 1e-9).ceil() as usize + 1;
        let steps = steps.max(need);
        (Just(f), trace(steps))
    })
}

/// Naive robustness evaluator written independently of the library: scans
/// every sample for window membership. `None` marks an empty window.
pub fn brute_rho(f: &Formula, tr: &Trace, t: usize) -> Option<f64> {
    let dt = tr.grid().dt;
    let steps = tr.len();
    let window = |a: f64, b: f64| -> Vec<usize> {
        (t..steps)
            .filter(|&k| {
                let off = (k - t) as f64 * dt;
                off >= a - 1e-9 * dt && off <= b + 1e-9 * dt
            })
            .collect()
    };
    match f {
        Formula::True => Some(f64::INFINITY),
        Formula::Pred(p) => {
            let mut acc = 0.0;
            for (name, c) in p.coeffs() {
                acc += c * tr.get(t, name)?;
            }
            Some(acc + p.offset())
        }
        Formula::Not(g) => brute_rho(g, tr, t).map(|v| -v),
        Formula::And(a, b) => Some(brute_rho(a, tr, t)?.min(brute_rho(b, tr, t)?)),
        Formula::Or(a, b) => Some(brute_rho(a, tr, t)?.max(brute_rho(b, tr, t)?)),
        Formula::Always(iv, g) => {
            let ks = window(iv.a(), iv.b());
            if ks.is_empty() {
                return None;
            }
            let mut best = f64::INFINITY;
            for k in ks {
                best = best.min(brute_rho(g, tr, k)?);
            }
            Some(best)
        }
        Formula::Eventually(iv, g) => {
            let ks = window(iv.a(), iv.b());
            if ks.is_empty() {
                return None;
            }
            let mut best = f64::NEG_INFINITY;
            for k in ks {
                best = best.max(brute_rho(g, tr, k)?);
            }
            Some(best)
        }
    }
}

/// Caps the trace length drawn by `formula_and_trace`.
pub fn capped_formula_and_trace(depth: u32, max_steps: usize) -> impl Strategy<Value = (Formula, Trace)> {
    (formula(depth), 1usize..=max_steps).prop_flat_map(move |(f, steps)| {
        let need = (reach(&f) / DT + 1e-9).ceil() as usize + 1;
        (Just(f), trace(steps.max(need).min(max_steps)))
    })
}
