//! Small problems with closed-form or brute-force answers.

use stlrelax::milp::{LinExpr, Model, Relation, SignalTable, SolverConfig, VarRef};
use stlrelax::stage1::{attach_specs, minimal_relaxation, NamedFormula, Plant, SoftHandling, SpecModel, SpecSet, Stage1Options};
use stlrelax::stage2::*;
use stlrelax::stl::{TimeGrid, Trace};

/// One frozen scalar `x` in `[0, 8]`, identical at every sample.
pub fn frozen_plant() -> Plant {
    let grid = TimeGrid::new(0.2, 3).unwrap();
    let mut model = Model::new();
    let x = model.add_continuous(0.0, 8.0, "x").unwrap();
    let mut signals = SignalTable::new(grid);
    signals.insert_vars("x", &[x, x, x]).unwrap();
    Plant { model, signals, cost: LinExpr::new() }
}

pub fn soft_bounds(lows: &[f64], highs: &[f64]) -> SpecSet {
    let mut soft = Vec::new();
    for (i, l) in lows.iter().enumerate() {
        soft.push(NamedFormula::new(format!("lo{i}"), format!("G[0,0.4](x >= {l})").parse().unwrap()));
    }
    for (i, h) in highs.iter().enumerate() {
        soft.push(NamedFormula::new(format!("hi{i}"), format!("x <= {h}").parse().unwrap()));
    }
    SpecSet::new(vec![], soft).unwrap()
}

pub fn delta_min(lows: &[f64], highs: &[f64]) -> f64 {
    let specs = soft_bounds(lows, highs);
    let sm = attach_specs(frozen_plant(), &specs, SoftHandling::Relax, &SolverConfig::default()).unwrap();
    minimal_relaxation(&sm, &specs, &Stage1Options::default()).unwrap().unwrap().delta_min
}

/// The relaxation cost is convex piecewise linear in `x`, so its minimum
/// over `[0, 8]` sits at a breakpoint or an endpoint.
pub fn analytic(lows: &[f64], highs: &[f64]) -> f64 {
    let cost = |x: f64| {
        lows.iter().map(|l| (l - x).max(0.0)).sum::<f64>() + highs.iter().map(|h| (x - h).max(0.0)).sum::<f64>()
    };
    lows.iter()
        .chain(highs)
        .map(|v| v.clamp(0.0, 8.0))
        .chain([0.0, 8.0])
        .map(cost)
        .fold(f64::INFINITY, f64::min)
}

pub fn dummy_trace() -> Trace {
    Trace::from_columns(TimeGrid::new(0.2, 1).unwrap(), vec![("x", vec![0.0])]).unwrap()
}

pub fn cand(seq: usize, g: Vec<f64>, delta_sum: f64, u: f64) -> Candidate {
    Candidate {
        seq,
        origin: Origin { k: 0, bounds: vec![] },
        values: vec![],
        trace: dummy_trace(),
        controls: vec![vec![u]],
        deltas: vec![delta_sum],
        delta_sum,
        total_risk: g.iter().sum(),
        g_true: g,
        g_surrogate: vec![],
    }
}

pub fn brute_nondominated(points: &[Vec<f64>]) -> Vec<bool> {
    (0..points.len())
        .map(|i| {
            !(0..points.len()).any(|j| {
                j != i && points[j].iter().zip(&points[i]).all(|(a, b)| a <= b) && points[j] != points[i]
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scalar toy: x in [0, 10]; soft specs x >= 5 and x <= 3 give delta_min = 2
// and a budget of 2 + alpha admits x in [3 - alpha, 5 + alpha]. Two clearance
// objectives pull in opposite directions:
//   g1 = max(0, c1 - x)   g2 = max(0, x - c2)

pub struct Toy {
    pub sm: SpecModel,
    pub specs: SpecSet,
    pub x: VarRef,
    pub surrogates: Vec<LinExpr>,
    pub c1: f64,
    pub c2: f64,
}

pub fn toy(c1: f64, c2: f64) -> Toy {
    let grid = TimeGrid::new(0.2, 3).unwrap();
    let mut model = Model::new();
    let x = model.add_continuous(0.0, 10.0, "x").unwrap();
    let mut signals = SignalTable::new(grid);
    signals.insert_vars("x", &[x, x, x]).unwrap();
    let plant = Plant { model, signals, cost: LinExpr::new() };
    let specs = SpecSet::new(
        vec![],
        vec![
            NamedFormula::new("lo", "G[0,0.4](x >= 5)".parse().unwrap()),
            NamedFormula::new("hi", "x <= 3".parse().unwrap()),
        ],
    )
    .unwrap();
    let mut sm = attach_specs(plant, &specs, SoftHandling::Relax, &SolverConfig::default()).unwrap();
    let h1 = sm.model.add_continuous(0.0, f64::INFINITY, "h1").unwrap();
    sm.model.add_constraint(LinExpr::from(h1) + x, Relation::Ge, c1).unwrap();
    let h2 = sm.model.add_continuous(0.0, f64::INFINITY, "h2").unwrap();
    sm.model.add_constraint(LinExpr::from(h2) - x, Relation::Ge, -c2).unwrap();
    Toy { sm, specs, x, surrogates: vec![h1.into(), h2.into()], c1, c2 }
}

impl Toy {
    pub fn g(&self, x: f64) -> Vec<f64> {
        vec![(self.c1 - x).max(0.0), (x - self.c2).max(0.0)]
    }

    pub fn delta_sum(x: f64) -> f64 {
        (5.0 - x).max(0.0) + (x - 3.0).max(0.0)
    }

    pub fn delta_min(&self) -> f64 {
        minimal_relaxation(&self.sm, &self.specs, &Stage1Options::default()).unwrap().unwrap().delta_min
    }

    pub fn run<T>(&self, alpha: f64, f: impl FnOnce(&EpsilonProblem) -> T) -> T {
        let names = vec!["g1".to_string(), "g2".to_string()];
        let controls = vec![vec![self.x]];
        let ep = EpsilonProblem {
            spec_model: &self.sm,
            specs: &self.specs,
            names: &names,
            surrogates: &self.surrogates,
            controls: &controls,
            evaluator: self,
            budget: Budget::new(self.delta_min(), alpha).unwrap(),
        };
        f(&ep)
    }

    /// Dense scan of admissible `x`.
    pub fn admissible(&self, alpha: f64) -> Vec<f64> {
        (0..=10_000).map(|i| i as f64 * 1e-3).filter(|&x| Self::delta_sum(x) <= 2.0 + alpha + 1e-9).collect()
    }
}

impl Evaluator for Toy {
    fn evaluate(&self, trace: &Trace, _controls: &[Vec<f64>]) -> Result<Evaluation, Stage2Error> {
        let g = self.g(trace.get(0, "x").unwrap());
        Ok(Evaluation { total_risk: g.iter().sum(), g_surrogate: g.clone(), g_true: g })
    }
}

pub fn opts(c: usize) -> Stage2Options {
    Stage2Options { grid_size: c, ..Stage2Options::default() }
}
