use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::atomic::{AtomicU32, Ordering};

use super::MilpError;

static NEXT_MODEL_ID: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Handle to a variable of one particular [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef {
    model: u32,
    index: u32,
}

impl VarRef {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

/// Affine expression `sum(coeff * var) + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    terms: Vec<(VarRef, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(var: VarRef, coeff: f64) -> Self {
        Self { terms: vec![(var, coeff)], constant: 0.0 }
    }

    pub fn add_term(&mut self, var: VarRef, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    /// Merges repeated variables and drops zero coefficients; terms come out
    /// sorted by variable index.
    pub fn normalized(&self) -> LinExpr {
        let mut acc: BTreeMap<VarRef, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *acc.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: acc.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            constant: self.constant,
        }
    }

    /// Evaluates against a dense value vector indexed by variable index.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| c * values[v.index()])
            .sum::<f64>()
            + self.constant
    }

    pub fn scaled(mut self, k: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl From<VarRef> for LinExpr {
    fn from(v: VarRef) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<LinExpr>> SubAssign<T> for LinExpr {
    fn sub_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
        self.constant -= rhs.constant;
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        self.scaled(k)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl Add<LinExpr> for VarRef {
    type Output = LinExpr;
    fn add(self, rhs: LinExpr) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl Sub<LinExpr> for VarRef {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

impl Mul<f64> for VarRef {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `expr rel rhs`, with the expression's constant folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: LinExpr,
    pub rel: Relation,
    pub rhs: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstrRef(usize);

impl ConstrRef {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Mixed-binary linear model built incrementally.
#[derive(Debug, Clone)]
pub struct Model {
    id: u32,
    vars: Vec<VarInfo>,
    constraints: Vec<Constraint>,
    sense: Sense,
    objective: LinExpr,
}

impl Default for Model {
    fn default() -> Self {
        Self::new()
    }
}

impl Model {
    pub fn new() -> Self {
        Self {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            vars: Vec::new(),
            constraints: Vec::new(),
            sense: Sense::Minimize,
            objective: LinExpr::new(),
        }
    }

    pub fn add_var(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarRef, MilpError> {
        let name = name.into();
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (lower, upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(MilpError::InvalidBounds { name, lower, upper });
        }
        let index = self.vars.len() as u32;
        self.vars.push(VarInfo { kind, lower, upper, name });
        Ok(VarRef { model: self.id, index })
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, name: impl Into<String>) -> Result<VarRef, MilpError> {
        self.add_var(VarKind::Continuous, lower, upper, name)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarRef, MilpError> {
        self.add_var(VarKind::Binary, 0.0, 1.0, name)
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<(), MilpError> {
        if !expr.constant.is_finite() {
            return Err(MilpError::NonFinite);
        }
        for &(v, c) in &expr.terms {
            if v.model != self.id || v.index() >= self.vars.len() {
                return Err(MilpError::ForeignVar);
            }
            if !c.is_finite() {
                return Err(MilpError::NonFinite);
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        expr: impl Into<LinExpr>,
        rel: Relation,
        rhs: f64,
    ) -> Result<ConstrRef, MilpError> {
        self.add_named_constraint(expr, rel, rhs, "")
    }

    pub fn add_named_constraint(
        &mut self,
        expr: impl Into<LinExpr>,
        rel: Relation,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<ConstrRef, MilpError> {
        let expr = expr.into();
        self.check_expr(&expr)?;
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite);
        }
        let mut norm = expr.normalized();
        let rhs = rhs - norm.constant;
        norm.constant = 0.0;
        self.constraints.push(Constraint { expr: norm, rel, rhs, name: name.into() });
        Ok(ConstrRef(self.constraints.len() - 1))
    }

    pub fn set_objective(&mut self, sense: Sense, expr: impl Into<LinExpr>) -> Result<(), MilpError> {
        let expr = expr.into();
        self.check_expr(&expr)?;
        self.sense = sense;
        self.objective = expr.normalized();
        Ok(())
    }

    pub fn set_rhs(&mut self, c: ConstrRef, rhs: f64) -> Result<(), MilpError> {
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite);
        }
        self.constraints[c.0].rhs = rhs;
        Ok(())
    }

    pub fn set_bounds(&mut self, v: VarRef, lower: f64, upper: f64) -> Result<(), MilpError> {
        if v.model != self.id || v.index() >= self.vars.len() {
            return Err(MilpError::ForeignVar);
        }
        let info = &mut self.vars[v.index()];
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(MilpError::InvalidBounds { name: info.name.clone(), lower, upper });
        }
        info.lower = lower;
        info.upper = upper;
        Ok(())
    }

    pub fn owns(&self, v: VarRef) -> bool {
        v.model == self.id && v.index() < self.vars.len()
    }

    pub fn var(&self, v: VarRef) -> &VarInfo {
        &self.vars[v.index()]
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var_ref(&self, index: usize) -> VarRef {
        assert!(index < self.vars.len());
        VarRef { model: self.id, index: index as u32 }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> (Sense, &LinExpr) {
        (self.sense, &self.objective)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Range of `expr` over the variable box, by interval arithmetic.
    pub fn bounds_of(&self, expr: &LinExpr) -> (f64, f64) {
        let mut lo = expr.constant;
        let mut hi = expr.constant;
        for &(v, c) in &expr.terms {
            if c == 0.0 {
                continue;
            }
            let info = &self.vars[v.index()];
            if c > 0.0 {
                lo += c * info.lower;
                hi += c * info.upper;
            } else {
                lo += c * info.upper;
                hi += c * info.lower;
            }
        }
        (if lo.is_nan() { f64::NEG_INFINITY } else { lo }, if hi.is_nan() { f64::INFINITY } else { hi })
    }
}
