use proptest::prelude::*;
use stlrelax::milp::{solve, LinExpr, Model, Relation, Sense, SolveStatus, SolverConfig};

/// A small MILP in plain data form so the oracle never touches the library.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n_cont: usize,
    pub n_bin: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
    pub obj: Vec<f64>,
    pub maximize: bool,
}

#[derive(Debug, PartialEq)]
pub enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

pub fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![4 => Just(Relation::Le), 3 => Just(Relation::Ge), 1 => Just(Relation::Eq)]
}

pub fn instance(max_cont: usize, max_bin: usize) -> impl Strategy<Value = Instance> {
    (0..=max_cont, 0..=max_bin, 1usize..=5, any::<bool>())
        .prop_filter("needs a variable", |(nc, nb, _, _)| nc + nb > 0)
        .prop_flat_map(|(nc, nb, nr, maximize)| {
        let n = nc + nb;
        let bound = prop_oneof![Just((0.0, 5.0)), Just((-5.0, 10.0)), Just((0.0, f64::INFINITY)), Just((f64::NEG_INFINITY, 4.0))];
        (
            proptest::collection::vec(bound, nc),
            proptest::collection::vec((proptest::collection::vec(-5i32..=5, n), relation(), -10i32..=10), nr),
            proptest::collection::vec(-5i32..=5, n),
        )
            .prop_map(move |(bounds, rows, obj)| Instance {
                n_cont: nc,
                n_bin: nb,
                lo: bounds.iter().map(|b| b.0).collect(),
                hi: bounds.iter().map(|b| b.1).collect(),
                rows: rows
                    .into_iter()
                    .map(|(c, r, b)| (c.into_iter().map(f64::from).collect(), r, b as f64))
                    .collect(),
                obj: obj.into_iter().map(f64::from).collect(),
                maximize,
            })
    })
}

pub fn build(inst: &Instance) -> Model {
    let mut m = Model::new();
    let mut vars = Vec::new();
    for j in 0..inst.n_cont {
        vars.push(m.add_continuous(inst.lo[j], inst.hi[j], format!("x{j}")).unwrap());
    }
    for j in 0..inst.n_bin {
        vars.push(m.add_binary(format!("z{j}")).unwrap());
    }
    for (coeffs, rel, rhs) in &inst.rows {
        let mut e = LinExpr::new();
        for (v, c) in vars.iter().zip(coeffs) {
            e.add_term(*v, *c);
        }
        m.add_constraint(e, *rel, *rhs).unwrap();
    }
    let mut obj = LinExpr::new();
    for (v, c) in vars.iter().zip(&inst.obj) {
        obj.add_term(*v, *c);
    }
    m.set_objective(if inst.maximize { Sense::Maximize } else { Sense::Minimize }, obj).unwrap();
    m
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Best objective (minimization form) of the continuous part with binaries
/// fixed, by enumerating vertices of the polytope boxed at `±big`.
pub fn lp_by_vertices(inst: &Instance, z: &[f64], big: f64, sign: f64) -> Option<f64> {
    let nc = inst.n_cont;
    // hyperplanes a.x = b, plus the inequality sense for feasibility checks
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineqs: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for (coeffs, rel, rhs) in &inst.rows {
        let fixed: f64 = coeffs[nc..].iter().zip(z).map(|(c, v)| c * v).sum();
        let a = coeffs[..nc].to_vec();
        planes.push((a.clone(), rhs - fixed));
        ineqs.push((a, *rel, rhs - fixed));
    }
    for j in 0..nc {
        let mut e = vec![0.0; nc];
        e[j] = 1.0;
        let lo = if inst.lo[j].is_finite() { inst.lo[j] } else { -big };
        let hi = if inst.hi[j].is_finite() { inst.hi[j] } else { big };
        planes.push((e.clone(), lo));
        planes.push((e.clone(), hi));
        ineqs.push((e.clone(), Relation::Ge, lo));
        ineqs.push((e, Relation::Le, hi));
    }
    let cost: Vec<f64> = inst.obj[..nc].iter().map(|c| sign * c).collect();
    let fixed_cost: f64 = inst.obj[nc..].iter().zip(z).map(|(c, v)| sign * c * v).sum();
    let mut best: Option<f64> = None;
    for combo in combinations(planes.len(), nc) {
        let a: Vec<Vec<f64>> = combo.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = combo.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let ok = ineqs.iter().all(|(a, rel, rhs)| {
            let v: f64 = a.iter().zip(&x).map(|(c, xi)| c * xi).sum();
            let tol = 1e-7 * (1.0 + rhs.abs());
            match rel {
                Relation::Le => v <= rhs + tol,
                Relation::Ge => v >= rhs - tol,
                Relation::Eq => (v - rhs).abs() <= tol,
            }
        });
        if ok {
            let val: f64 = cost.iter().zip(&x).map(|(c, xi)| c * xi).sum::<f64>() + fixed_cost;
            best = Some(best.map_or(val, |b: f64| b.min(val)));
        }
    }
    best
}

pub fn oracle(inst: &Instance) -> Oracle {
    let sign = if inst.maximize { -1.0 } else { 1.0 };
    let mut best_small: Option<f64> = None;
    let mut best_large: Option<f64> = None;
    for mask in 0u32..(1 << inst.n_bin) {
        let z: Vec<f64> = (0..inst.n_bin).map(|j| ((mask >> j) & 1) as f64).collect();
        if let Some(v) = lp_by_vertices(inst, &z, 1e5, sign) {
            best_small = Some(best_small.map_or(v, |b: f64| b.min(v)));
        }
        if let Some(v) = lp_by_vertices(inst, &z, 2e5, sign) {
            best_large = Some(best_large.map_or(v, |b: f64| b.min(v)));
        }
    }
    match (best_small, best_large) {
        (None, _) => Oracle::Infeasible,
        (Some(s), Some(l)) if l < s - 1e-3 => Oracle::Unbounded,
        (Some(s), _) => Oracle::Optimal(sign * s),
    }
}

pub fn check(inst: &Instance) -> Result<(), String> {
    let m = build(inst);
    let sol = solve(&m, &SolverConfig::default()).unwrap();
    match oracle(inst) {
        Oracle::Optimal(v) => {
            if sol.status != SolveStatus::Optimal {
                return Err(format!("{:?} instead of optimum {v} on {inst:?}", sol.status));
            }
            if (sol.objective_value - v).abs() > 1e-6 * (1.0 + v.abs()) {
                return Err(format!("solver {} oracle {v} on {inst:?}", sol.objective_value));
            }
        }
        Oracle::Infeasible if sol.status != SolveStatus::Infeasible => {
            return Err(format!("{:?} on infeasible {inst:?}", sol.status))
        }
        Oracle::Unbounded if sol.status != SolveStatus::Unbounded => {
            return Err(format!("{:?} on unbounded {inst:?}", sol.status))
        }
        _ => {}
    }
    Ok(())
}
