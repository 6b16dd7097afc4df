//! Formula abstract syntax.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::StlError;

/// Affine predicate `sum(coeffs[d] * S_d(t)) + offset >= 0`.
///
/// Zero coefficients are never stored, so a predicate with an empty map is a
/// constant predicate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    coeffs: BTreeMap<String, f64>,
    offset: f64,
}

impl Predicate {
    pub fn new<I, S>(terms: I, offset: f64) -> Result<Self, StlError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut coeffs = BTreeMap::new();
        for (name, c) in terms {
            *coeffs.entry(name.into()).or_insert(0.0) += c;
        }
        Self::from_map(coeffs, offset)
    }

    pub(crate) fn from_map(mut coeffs: BTreeMap<String, f64>, offset: f64) -> Result<Self, StlError> {
        if !offset.is_finite() || coeffs.values().any(|c| !c.is_finite()) {
            return Err(StlError::NonFinite);
        }
        coeffs.retain(|_, c| *c != 0.0);
        Ok(Self { coeffs, offset: if offset == 0.0 { 0.0 } else { offset } })
    }

    /// `name - bound >= 0`.
    pub fn ge(name: &str, bound: f64) -> Self {
        Self::new([(name, 1.0)], -bound).expect("finite bound")
    }

    /// `bound - name >= 0`.
    pub fn le(name: &str, bound: f64) -> Self {
        Self::new([(name, -1.0)], bound).expect("finite bound")
    }

    pub fn coeffs(&self) -> &BTreeMap<String, f64> {
        &self.coeffs
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The predicate `-l(S) >= 0`.
    pub fn negated(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            offset: if self.offset == 0.0 { 0.0 } else { -self.offset },
        }
    }
}

/// Closed time interval `[a, b]` in seconds, relative to the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, StlError> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || a > b {
            return Err(StlError::InvalidInterval { a, b });
        }
        Ok(Self { a: if a == 0.0 { 0.0 } else { a }, b: if b == 0.0 { 0.0 } else { b } })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Pred(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Pred(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn always(iv: Interval, f: Formula) -> Self {
        Formula::Always(iv, Box::new(f))
    }

    pub fn eventually(iv: Interval, f: Formula) -> Self {
        Formula::Eventually(iv, Box::new(f))
    }

    /// Left-nested conjunction of a non-empty list.
    pub fn all(mut items: Vec<Formula>) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let first = items.remove(0);
        Some(items.into_iter().fold(first, Formula::and))
    }

    /// Left-nested disjunction of a non-empty list.
    pub fn any(mut items: Vec<Formula>) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let first = items.remove(0);
        Some(items.into_iter().fold(first, Formula::or))
    }

    /// Every signal dimension referenced by a predicate.
    pub fn dims(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_dims(&mut out);
        out
    }

    fn collect_dims(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => out.extend(p.coeffs.keys().cloned()),
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => f.collect_dims(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_dims(out);
                b.collect_dims(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Negation normal form: negations are pushed onto predicates (flipping
    /// their sign) so that only `Not(True)` survives. Robustness is preserved
    /// exactly because negation commutes with min/max.
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, neg: bool) -> Formula {
        match (self, neg) {
            (Formula::True, false) => Formula::True,
            (Formula::True, true) => Formula::not(Formula::True),
            (Formula::Pred(p), false) => Formula::Pred(p.clone()),
            (Formula::Pred(p), true) => Formula::Pred(p.negated()),
            (Formula::Not(f), _) => f.nnf(!neg),
            (Formula::And(a, b), false) => Formula::and(a.nnf(false), b.nnf(false)),
            (Formula::And(a, b), true) => Formula::or(a.nnf(true), b.nnf(true)),
            (Formula::Or(a, b), false) => Formula::or(a.nnf(false), b.nnf(false)),
            (Formula::Or(a, b), true) => Formula::and(a.nnf(true), b.nnf(true)),
            (Formula::Always(iv, f), false) => Formula::always(*iv, f.nnf(false)),
            (Formula::Always(iv, f), true) => Formula::eventually(*iv, f.nnf(true)),
            (Formula::Eventually(iv, f), false) => Formula::eventually(*iv, f.nnf(false)),
            (Formula::Eventually(iv, f), true) => Formula::always(*iv, f.nnf(true)),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, &c) in &self.coeffs {
            if first {
                match c {
                    c if c == 1.0 => write!(f, "{name}")?,
                    c if c == -1.0 => write!(f, "-{name}")?,
                    c => write!(f, "{c}*{name}")?,
                }
                first = false;
            } else {
                let sign = if c < 0.0 { '-' } else { '+' };
                let mag = c.abs();
                if mag == 1.0 {
                    write!(f, " {sign} {name}")?;
                } else {
                    write!(f, " {sign} {mag}*{name}")?;
                }
            }
        }
        if first {
            write!(f, "{}", self.offset)?;
        } else if self.offset != 0.0 {
            let sign = if self.offset < 0.0 { '-' } else { '+' };
            write!(f, " {sign} {}", self.offset.abs())?;
        }
        write!(f, " >= 0")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Pred(p) => write!(f, "{p}"),
            Formula::Not(g) => write!(f, "not ({g})"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
            Formula::Eventually(iv, g) => write!(f, "F{iv}({g})"),
            Formula::Always(iv, g) => write!(f, "G{iv}({g})"),
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = StlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::parse::parse_formula(s)
    }
}
