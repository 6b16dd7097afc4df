//! Big-M compilation of STL robustness into model variables.

use std::collections::{BTreeMap, HashMap};

use super::bnb::SolverConfig;
use super::model::{LinExpr, Model, Relation, VarRef};
use super::MilpError;
use crate::stl::{interval_to_indices, Formula, Interval, StlError, TimeGrid, Trace};

/// How tightly an encoded value tracks the true robustness.
///
/// `Exact` pins the value to the min/max at every integer-feasible point.
/// `LowerBound` only guarantees `value <= robustness`, which is all that a
/// constraint of the form `robustness >= bound` needs; min gadgets then need
/// no binaries at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Exact,
    LowerBound,
}

/// Per-dimension, per-sample affine expressions standing in for a trace.
#[derive(Debug, Clone)]
pub struct SignalTable {
    grid: TimeGrid,
    columns: BTreeMap<String, Vec<LinExpr>>,
}

impl SignalTable {
    pub fn new(grid: TimeGrid) -> Self {
        Self { grid, columns: BTreeMap::new() }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn insert(&mut self, name: impl Into<String>, column: Vec<LinExpr>) -> Result<(), MilpError> {
        let name = name.into();
        if column.len() != self.grid.steps {
            return Err(MilpError::Stl(StlError::ShapeMismatch(format!(
                "signal `{name}` has {} samples, grid has {}",
                column.len(),
                self.grid.steps
            ))));
        }
        if self.columns.contains_key(&name) {
            return Err(MilpError::Stl(StlError::DuplicateDimension(name)));
        }
        self.columns.insert(name, column);
        Ok(())
    }

    pub fn insert_vars(&mut self, name: impl Into<String>, vars: &[VarRef]) -> Result<(), MilpError> {
        self.insert(name, vars.iter().map(|&v| LinExpr::from(v)).collect())
    }

    pub fn insert_constants(&mut self, name: impl Into<String>, values: &[f64]) -> Result<(), MilpError> {
        self.insert(name, values.iter().map(|&c| LinExpr::constant(c)).collect())
    }

    pub fn get(&self, name: &str, k: usize) -> Option<&LinExpr> {
        self.columns.get(name).and_then(|c| c.get(k))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Evaluates every column at a solution point.
    pub fn to_trace(&self, values: &[f64]) -> Result<Trace, StlError> {
        let cols = self
            .columns
            .iter()
            .map(|(name, col)| (name.clone(), col.iter().map(|e| e.eval(values)).collect()))
            .collect();
        Trace::from_columns(self.grid, cols)
    }
}

/// Encoded robustness: an affine expression, or a constant infinity coming
/// from `true` and its negation.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Expr(LinExpr),
    PosInf,
    NegInf,
}

#[derive(Clone, Copy)]
enum Agg {
    Min,
    Max,
}

/// Encodes formulas against one signal table, sharing gadgets between calls.
///
/// Repeated subformulas at the same sample (for example a clearance
/// disjunction used both by a spec and by an objective) are compiled once.
#[derive(Debug, Clone)]
pub struct RobustnessEncoder {
    signals: SignalTable,
    cfg: SolverConfig,
    polarity: Polarity,
    cache: HashMap<(String, usize), Encoded>,
}

impl RobustnessEncoder {
    pub fn new(signals: SignalTable, cfg: SolverConfig, polarity: Polarity) -> Self {
        Self { signals, cfg, polarity, cache: HashMap::new() }
    }

    pub fn signals(&self) -> &SignalTable {
        &self.signals
    }

    pub fn encode(&mut self, m: &mut Model, f: &Formula, t_index: usize) -> Result<Encoded, MilpError> {
        if t_index >= self.signals.grid.steps {
            return Err(MilpError::Stl(StlError::IndexOutOfRange {
                index: t_index,
                steps: self.signals.grid.steps,
            }));
        }
        let nnf = f.to_nnf();
        self.enc(m, &nnf, t_index)
    }

    fn enc(&mut self, m: &mut Model, f: &Formula, t: usize) -> Result<Encoded, MilpError> {
        match f {
            Formula::True => Ok(Encoded::PosInf),
            Formula::Not(g) if **g == Formula::True => Ok(Encoded::NegInf),
            Formula::Not(_) => unreachable!("formula is in negation normal form"),
            Formula::Pred(p) => {
                let mut e = LinExpr::constant(p.offset());
                for (name, c) in p.coeffs() {
                    let s = self
                        .signals
                        .get(name, t)
                        .ok_or_else(|| MilpError::Stl(StlError::UnknownDimension(name.clone())))?;
                    e += s.clone() * *c;
                }
                Ok(Encoded::Expr(e.normalized()))
            }
            Formula::And(..) | Formula::Always(..) | Formula::Or(..) | Formula::Eventually(..) => {
                let key = (f.to_string(), t);
                if let Some(hit) = self.cache.get(&key) {
                    return Ok(hit.clone());
                }
                let agg = if matches!(f, Formula::And(..) | Formula::Always(..)) { Agg::Min } else { Agg::Max };
                let mut leaves = Vec::new();
                self.flatten(f, t, agg, &mut leaves)?;
                let mut exprs = Vec::with_capacity(leaves.len());
                let mut absorbed = false;
                for (g, k) in leaves {
                    match (self.enc(m, g, k)?, agg) {
                        (Encoded::Expr(e), _) => exprs.push(e),
                        (Encoded::PosInf, Agg::Min) | (Encoded::NegInf, Agg::Max) => {}
                        (Encoded::NegInf, Agg::Min) | (Encoded::PosInf, Agg::Max) => absorbed = true,
                    }
                }
                let out = if absorbed {
                    match agg {
                        Agg::Min => Encoded::NegInf,
                        Agg::Max => Encoded::PosInf,
                    }
                } else if exprs.is_empty() {
                    match agg {
                        Agg::Min => Encoded::PosInf,
                        Agg::Max => Encoded::NegInf,
                    }
                } else {
                    Encoded::Expr(aggregate(m, exprs, agg, self.polarity, &self.cfg)?)
                };
                self.cache.insert(key, out.clone());
                Ok(out)
            }
        }
    }

    /// Collects the operands of a chain of same-kind operators.
    fn flatten<'f>(
        &self,
        f: &'f Formula,
        t: usize,
        agg: Agg,
        out: &mut Vec<(&'f Formula, usize)>,
    ) -> Result<(), MilpError> {
        match (f, agg) {
            (Formula::And(a, b), Agg::Min) | (Formula::Or(a, b), Agg::Max) => {
                self.flatten(a, t, agg, out)?;
                self.flatten(b, t, agg, out)
            }
            (Formula::Always(iv, g), Agg::Min) | (Formula::Eventually(iv, g), Agg::Max) => {
                for k in self.window(*iv, t)? {
                    self.flatten(g, k, agg, out)?;
                }
                Ok(())
            }
            _ => {
                out.push((f, t));
                Ok(())
            }
        }
    }

    fn window(&self, iv: Interval, t: usize) -> Result<std::ops::Range<usize>, MilpError> {
        let r = interval_to_indices(iv, self.signals.grid, t);
        if r.is_empty() {
            return Err(MilpError::Stl(StlError::EmptyWindow { a: iv.a(), b: iv.b(), t_index: t }));
        }
        Ok(r)
    }
}

fn aggregate(
    m: &mut Model,
    exprs: Vec<LinExpr>,
    agg: Agg,
    polarity: Polarity,
    cfg: &SolverConfig,
) -> Result<LinExpr, MilpError> {
    // a max is a min of negated operands, negated back
    let (exprs, flip) = match agg {
        Agg::Min => (exprs, false),
        Agg::Max => (exprs.into_iter().map(|e| -e).collect(), true),
    };
    let pol = match (polarity, flip) {
        (Polarity::Exact, _) => MinPolarity::Exact,
        (Polarity::LowerBound, false) => MinPolarity::Below,
        (Polarity::LowerBound, true) => MinPolarity::Above,
    };
    let r = min_gadget(m, exprs, pol, cfg)?;
    Ok(if flip { -r } else { r })
}

#[derive(Clone, Copy, PartialEq)]
enum MinPolarity {
    Exact,
    /// `r <= min`.
    Below,
    /// `r >= min`.
    Above,
}

/// Drops operands that can never attain the minimum, keeping the first of
/// any exact ties.
fn prune_for_min(m: &Model, exprs: Vec<LinExpr>) -> Vec<LinExpr> {
    if exprs.len() <= 1 {
        return exprs;
    }
    let bounds: Vec<(f64, f64)> = exprs.iter().map(|e| m.bounds_of(e)).collect();
    let mut best = 0;
    for (i, b) in bounds.iter().enumerate() {
        if b.1 < bounds[best].1 {
            best = i;
        }
    }
    let cap = bounds[best].1;
    exprs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i == best || bounds[*i].0 < cap)
        .map(|(_, e)| e)
        .collect()
}

fn check_m(required: f64, cfg: &SolverConfig, what: &str) -> Result<f64, MilpError> {
    if !required.is_finite() || required > cfg.big_m {
        return Err(MilpError::BigMExceeded { what: what.to_string(), required, big_m: cfg.big_m });
    }
    Ok(required.max(0.0))
}

fn min_gadget(m: &mut Model, exprs: Vec<LinExpr>, pol: MinPolarity, cfg: &SolverConfig) -> Result<LinExpr, MilpError> {
    let exprs = prune_for_min(m, exprs);
    if exprs.len() == 1 {
        return Ok(exprs.into_iter().next().expect("one operand"));
    }
    let bounds: Vec<(f64, f64)> = exprs.iter().map(|e| m.bounds_of(e)).collect();
    let r_lo = bounds.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let r_hi = bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let id = m.num_vars();
    let r = m.add_continuous(r_lo, r_hi, format!("rmin{id}"))?;

    if pol != MinPolarity::Above {
        for e in &exprs {
            m.add_constraint(LinExpr::from(r) - e.clone(), Relation::Le, 0.0)?;
        }
    }
    if pol == MinPolarity::Below {
        return Ok(LinExpr::from(r));
    }
    // r >= e_i - M_i (1 - z_i), exactly one selector active
    let mut sum = LinExpr::new();
    for (i, e) in exprs.iter().enumerate() {
        let big = check_m(bounds[i].1 - r_lo, cfg, "min selector")?;
        let z = m.add_binary(format!("z{id}_{i}"))?;
        sum.add_term(z, 1.0);
        // r - e_i - M z_i >= -M
        let row = LinExpr::from(r) - e.clone() - LinExpr::term(z, big);
        m.add_constraint(row, Relation::Ge, -big)?;
    }
    m.add_constraint(sum, Relation::Eq, 1.0)?;
    Ok(LinExpr::from(r))
}

fn pin(m: &mut Model, e: LinExpr, name: &str) -> Result<VarRef, MilpError> {
    let (lo, hi) = m.bounds_of(&e);
    let id = m.num_vars();
    let r = m.add_continuous(lo, hi, format!("{name}{id}"))?;
    m.add_constraint(LinExpr::from(r) - e, Relation::Eq, 0.0)?;
    Ok(r)
}

/// Fresh variable equal to `min(exprs)` at every integer-feasible point.
pub fn encode_min(m: &mut Model, exprs: &[LinExpr], cfg: &SolverConfig) -> Result<VarRef, MilpError> {
    if exprs.is_empty() {
        return Err(MilpError::EmptyOperands);
    }
    let e = min_gadget(m, exprs.to_vec(), MinPolarity::Exact, cfg)?;
    pin(m, e, "min")
}

/// Fresh variable equal to `max(exprs)` at every integer-feasible point.
pub fn encode_max(m: &mut Model, exprs: &[LinExpr], cfg: &SolverConfig) -> Result<VarRef, MilpError> {
    if exprs.is_empty() {
        return Err(MilpError::EmptyOperands);
    }
    let neg: Vec<LinExpr> = exprs.iter().map(|e| -e.clone()).collect();
    let e = min_gadget(m, neg, MinPolarity::Exact, cfg)?;
    pin(m, -e, "max")
}

/// Fresh variable equal to the robustness of `f` at `t_index`.
pub fn encode_robustness(
    m: &mut Model,
    f: &Formula,
    signals: &SignalTable,
    t_index: usize,
    cfg: &SolverConfig,
) -> Result<VarRef, MilpError> {
    let mut enc = RobustnessEncoder::new(signals.clone(), *cfg, Polarity::Exact);
    match enc.encode(m, f, t_index)? {
        Encoded::Expr(e) => pin(m, e, "rho"),
        _ => Err(MilpError::InfiniteRobustness),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, Sense, SolveStatus};
    use crate::stl::parse_formula;

    fn optimum(m: &mut Model, r: VarRef, sense: Sense) -> f64 {
        m.set_objective(sense, r).unwrap();
        let s = solve(m, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        s.value(r)
    }

    #[test]
    fn constant_min_and_max() {
        let cfg = SolverConfig::default();
        let mut m = Model::new();
        let r = encode_min(&mut m, &[LinExpr::constant(3.0), LinExpr::constant(5.0)], &cfg).unwrap();
        assert_eq!(optimum(&mut m, r, Sense::Maximize), 3.0);
        let mut m = Model::new();
        let r = encode_max(&mut m, &[LinExpr::constant(-1.0), LinExpr::constant(2.0)], &cfg).unwrap();
        assert_eq!(optimum(&mut m, r, Sense::Minimize), 2.0);
    }

    #[test]
    fn single_operand_has_no_binaries() {
        let cfg = SolverConfig::default();
        let mut m = Model::new();
        let x = m.add_continuous(-1.0, 1.0, "x").unwrap();
        encode_min(&mut m, &[LinExpr::from(x) + 1.0], &cfg).unwrap();
        assert_eq!(m.num_binaries(), 0);
    }

    #[test]
    fn pinned_always() {
        let cfg = SolverConfig::default();
        let grid = TimeGrid::new(0.2, 3).unwrap();
        let mut m = Model::new();
        let v: Vec<VarRef> = (0..3).map(|k| m.add_continuous(-10.0, 10.0, format!("v{k}")).unwrap()).collect();
        for (k, val) in [1.0, -2.0, 3.0].iter().enumerate() {
            m.add_constraint(v[k], Relation::Eq, *val).unwrap();
        }
        let mut table = SignalTable::new(grid);
        table.insert_vars("v", &v).unwrap();
        let f = parse_formula("G[0,0.4](v >= 0)").unwrap();
        let r = encode_robustness(&mut m, &f, &table, 0, &cfg).unwrap();
        assert!((optimum(&mut m, r, Sense::Maximize) + 2.0).abs() < 1e-9);
        assert!((optimum(&mut m, r, Sense::Minimize) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn big_m_overflow_is_an_error() {
        let cfg = SolverConfig { big_m: 10.0, ..SolverConfig::default() };
        let mut m = Model::new();
        let x = m.add_continuous(-100.0, 100.0, "x").unwrap();
        let y = m.add_continuous(-100.0, 100.0, "y").unwrap();
        let err = encode_min(&mut m, &[x.into(), y.into()], &cfg).unwrap_err();
        assert!(matches!(err, MilpError::BigMExceeded { .. }));
    }
}
