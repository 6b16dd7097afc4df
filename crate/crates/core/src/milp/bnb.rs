use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::model::{LinExpr, Model, Relation, Sense, VarKind, VarRef};
use super::simplex::{LpData, LpStatus, Simplex};
use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Relative optimality gap at which a node is pruned.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub big_m: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { feas_tol: 1e-6, int_tol: 1e-6, gap_tol: 1e-6, node_limit: 200_000, big_m: 1e4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Dense values indexed by variable index; empty when no point was found.
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarRef) -> f64 {
        self.values[v.index()]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.values)
    }
}

struct Node {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, f64)>,
    origin: Option<Branch>,
}

/// The branching step that created a node: variable, direction, distance
/// moved and the parent LP value.
#[derive(Clone, Copy)]
struct Branch {
    var: usize,
    up: bool,
    dist: f64,
    parent: f64,
}

/// Per-variable average objective gain per unit of rounding distance.
struct PseudoCosts {
    sum: Vec<[f64; 2]>,
    cnt: Vec<[u32; 2]>,
}

impl PseudoCosts {
    fn new(n: usize) -> Self {
        Self { sum: vec![[0.0; 2]; n], cnt: vec![[0; 2]; n] }
    }

    fn record(&mut self, b: Branch, obj: f64) {
        let d = b.up as usize;
        self.sum[b.var][d] += ((obj - b.parent) / b.dist.max(1e-9)).max(0.0);
        self.cnt[b.var][d] += 1;
    }

    fn average(&self, d: usize) -> f64 {
        let (s, c) = self.sum.iter().zip(&self.cnt).fold((0.0, 0u32), |(s, c), (x, k)| (s + x[d], c + k[d]));
        if c == 0 {
            1.0
        } else {
            s / c as f64
        }
    }

    fn score(&self, j: usize, f: f64, avg: [f64; 2]) -> f64 {
        let psi = |d: usize| if self.cnt[j][d] == 0 { avg[d] } else { self.sum[j][d] / self.cnt[j][d] as f64 };
        (psi(0) * f).max(1e-6) * (psi(1) * (1.0 - f)).max(1e-6)
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn lp_data(model: &Model) -> (LpData, f64, f64) {
    let n = model.num_vars();
    let mut rows = Vec::with_capacity(model.num_constraints());
    let mut row_lo = Vec::new();
    let mut row_hi = Vec::new();
    for c in model.constraints() {
        rows.push(c.expr.terms().iter().map(|&(v, a)| (v.index(), a)).collect());
        let (l, h) = match c.rel {
            Relation::Le => (f64::NEG_INFINITY, c.rhs),
            Relation::Ge => (c.rhs, f64::INFINITY),
            Relation::Eq => (c.rhs, c.rhs),
        };
        row_lo.push(l);
        row_hi.push(h);
    }
    let (sense, obj) = model.objective();
    let sign = if sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; n];
    for &(v, a) in obj.terms() {
        cost[v.index()] += sign * a;
    }
    let data = LpData {
        n,
        rows,
        row_lo,
        row_hi,
        col_lo: model.vars().iter().map(|v| v.lower).collect(),
        col_hi: model.vars().iter().map(|v| v.upper).collect(),
        cost,
    };
    (data, sign, obj.constant_term())
}

/// Checks bounds, rows and integrality of a dense point.
pub fn is_feasible(model: &Model, values: &[f64], cfg: &SolverConfig) -> bool {
    if values.len() != model.num_vars() {
        return false;
    }
    let tol = cfg.feas_tol;
    for (v, &x) in model.vars().iter().zip(values) {
        if !x.is_finite() || x < v.lower - tol || x > v.upper + tol {
            return false;
        }
        if v.kind == VarKind::Binary && (x - x.round()).abs() > cfg.int_tol {
            return false;
        }
    }
    model.constraints().iter().all(|c| {
        let a = c.expr.eval(values);
        let scale = 1.0 + c.rhs.abs();
        match c.rel {
            Relation::Le => a <= c.rhs + tol * scale,
            Relation::Ge => a >= c.rhs - tol * scale,
            Relation::Eq => (a - c.rhs).abs() <= tol * scale,
        }
    })
}

pub fn solve(model: &Model, cfg: &SolverConfig) -> Result<MilpSolution, MilpError> {
    solve_with_start(model, cfg, None)
}

/// Branch and bound over LP relaxations.
///
/// The search dives depth-first into the child on the rounding side of the
/// branching variable, reusing the simplex basis in place, and falls back to
/// the best-bound open node when a dive ends. An optional feasible `start`
/// point seeds the incumbent.
pub fn solve_with_start(
    model: &Model,
    cfg: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<MilpSolution, MilpError> {
    if model.num_vars() == 0 {
        return Err(MilpError::EmptyModel);
    }
    let (data, sign, obj_const) = lp_data(model);
    let n = data.n;
    let binaries: Vec<usize> =
        (0..n).filter(|&j| model.vars()[j].kind == VarKind::Binary).collect();
    let iter_cap = 50 * (n + data.m()) + 10_000;
    let mut lp = Simplex::new(data, cfg.feas_tol * 1e-3);

    let lp_obj = |vals: &[f64]| -> f64 {
        let (_, obj) = model.objective();
        sign * (obj.eval(vals) - obj_const)
    };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(s) = start {
        if is_feasible(model, s, cfg) {
            let mut vals = s.to_vec();
            for &j in &binaries {
                vals[j] = vals[j].round();
            }
            incumbent = Some((lp_obj(&vals), vals));
        }
    }

    let cutoff = |inc: &Option<(f64, Vec<f64>)>| -> f64 {
        match inc {
            Some((v, _)) => v - cfg.gap_tol * v.abs().max(1.0),
            None => f64::INFINITY,
        }
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut nodes = 0usize;
    let mut hit_limit = false;
    // fixes applied on the current dive; None means the dive ended
    let mut dive: Option<Vec<(usize, f64)>> = Some(Vec::new());
    let mut origin: Option<Branch> = None;
    let mut pc = PseudoCosts::new(n);
    let mut root = true;

    loop {
        let fixes = match dive.take() {
            Some(f) => f,
            None => {
                let Some(node) = heap.pop() else { break };
                if node.bound >= cutoff(&incumbent) {
                    heap.clear();
                    break;
                }
                // bounds change only, so the current basis stays dual feasible
                let mut target = vec![None; n];
                for &(j, v) in &node.fixes {
                    target[j] = Some(v);
                }
                for &j in &binaries {
                    let (lo, hi) = target[j].map_or((0.0, 1.0), |v| (v, v));
                    if lp.col_bounds(j) != (lo, hi) {
                        lp.set_col_bounds(j, lo, hi);
                    }
                }
                lp.recompute();
                origin = node.origin;
                node.fixes
            }
        };
        if nodes >= cfg.node_limit {
            hit_limit = true;
            break;
        }
        nodes += 1;
        let mut status = lp.solve(iter_cap);
        if status == LpStatus::Infeasible && !root {
            // confirm on a fresh factorization before discarding the node
            lp.refresh();
            status = lp.solve(iter_cap);
        }
        if status != LpStatus::Optimal {
            origin = None;
        }
        match status {
            LpStatus::Infeasible => {
                root = false;
                continue;
            }
            LpStatus::Unbounded => {
                if root {
                    // unbounded relaxation: the MILP is unbounded iff any
                    // integer point exists
                    let mut probe = model.clone();
                    probe.set_objective(Sense::Minimize, LinExpr::new())?;
                    let found = solve_with_start(&probe, cfg, None)?;
                    if found.status == SolveStatus::Infeasible {
                        return Ok(found);
                    }
                    return Ok(MilpSolution {
                        status: SolveStatus::Unbounded,
                        values: Vec::new(),
                        objective_value: sign * f64::NEG_INFINITY,
                        nodes,
                    });
                }
                root = false;
                continue;
            }
            LpStatus::IterLimit => {
                log::warn!("simplex iteration cap reached; node dropped");
                hit_limit = true;
                root = false;
                continue;
            }
            LpStatus::Optimal => {}
        }
        root = false;
        let obj = lp.objective();
        if let Some(b) = origin.take() {
            pc.record(b, obj);
        }
        if obj >= cutoff(&incumbent) {
            continue;
        }
        let vals = lp.values();
        let avg = [pc.average(0), pc.average(1)];
        let mut branch = None;
        let mut best_score = f64::NEG_INFINITY;
        for &j in &binaries {
            let f = vals[j] - vals[j].floor();
            if f.min(1.0 - f) <= cfg.int_tol {
                continue;
            }
            let score = pc.score(j, f, avg);
            if score > best_score {
                best_score = score;
                branch = Some(j);
            }
        }
        match branch {
            None => {
                let mut point = vals.to_vec();
                for &j in &binaries {
                    point[j] = point[j].round();
                }
                incumbent = Some((obj, point));
            }
            Some(j) => {
                let up_first = vals[j] >= 0.5;
                let (first, second) = if up_first { (1.0, 0.0) } else { (0.0, 1.0) };
                let step = |up: bool| Branch { var: j, up, dist: if up { 1.0 - vals[j] } else { vals[j] }, parent: obj };
                let mut other = fixes.clone();
                other.push((j, second));
                heap.push(Node { bound: obj, seq, fixes: other, origin: Some(step(!up_first)) });
                origin = Some(step(up_first));
                seq += 1;
                let mut mine = fixes;
                mine.push((j, first));
                lp.set_col_bounds(j, first, first);
                dive = Some(mine);
            }
        }
    }

    let status = match (&incumbent, hit_limit) {
        (_, true) => SolveStatus::NodeLimit,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    Ok(match incumbent {
        Some((_, values)) => {
            let objective_value = model.objective().1.eval(&values);
            MilpSolution { status, values, objective_value, nodes }
        }
        None => MilpSolution { status, values: Vec::new(), objective_value: f64::NAN, nodes },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_min_x_ge_3() {
        let mut m = Model::new();
        let x = m.add_continuous(0.0, f64::INFINITY, "x").unwrap();
        m.add_constraint(x, Relation::Ge, 3.0).unwrap();
        m.set_objective(Sense::Minimize, x).unwrap();
        let s = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn small_knapsack() {
        let mut m = Model::new();
        let z: Vec<_> = (0..3).map(|i| m.add_binary(format!("z{i}")).unwrap()).collect();
        let w = [2.0, 3.0, 1.0];
        let p = [4.0, 5.0, 3.0];
        let mut cap = LinExpr::new();
        let mut obj = LinExpr::new();
        for i in 0..3 {
            cap.add_term(z[i], w[i]);
            obj.add_term(z[i], p[i]);
        }
        m.add_constraint(cap, Relation::Le, 4.0).unwrap();
        m.set_objective(Sense::Maximize, obj).unwrap();
        let s = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 8.0).abs() < 1e-9, "{}", s.objective_value);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut m = Model::new();
        let x = m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, "x").unwrap();
        m.add_constraint(x, Relation::Ge, 5.0).unwrap();
        m.add_constraint(x, Relation::Le, 3.0).unwrap();
        m.set_objective(Sense::Minimize, x).unwrap();
        assert_eq!(solve(&m, &SolverConfig::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_root() {
        let mut m = Model::new();
        let x = m.add_continuous(0.0, f64::INFINITY, "x").unwrap();
        m.set_objective(Sense::Maximize, x).unwrap();
        assert_eq!(solve(&m, &SolverConfig::default()).unwrap().status, SolveStatus::Unbounded);
    }
}
