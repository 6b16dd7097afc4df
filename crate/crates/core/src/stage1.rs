//! Feasibility restoration: the nominal STL-constrained MPC and its minimal
//! L1 relaxation over negotiable specifications.
//!
//! The relaxation machinery works on any [`Plant`] (a model whose signals are
//! exposed through a [`SignalTable`]); [`build_plant`] supplies the vehicle
//! MPC instance used by the scenarios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AffineStep, ControlInput, VehicleParams, VehicleState};
use crate::milp::{
    solve, solve_with_start, Encoded, LinExpr, MilpError, MilpSolution, Model, Polarity, Relation,
    RobustnessEncoder, Sense, SignalTable, SolveStatus, SolverConfig, VarRef,
};
use crate::stl::{interval_to_indices, robustness, Formula, StlError, TimeGrid, Trace};

#[derive(Debug, Error)]
pub enum Stage1Error {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("solver stopped without a solution: {0}")]
    SolverLimit(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedFormula {
    pub name: String,
    pub formula: Formula,
}

impl NamedFormula {
    pub fn new(name: impl Into<String>, formula: Formula) -> Self {
        Self { name: name.into(), formula }
    }
}

/// Non-negotiable and negotiable formulas. Soft order fixes the indexing of
/// the relaxation vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecSet {
    hard: Vec<NamedFormula>,
    soft: Vec<NamedFormula>,
}

impl SpecSet {
    pub fn new(hard: Vec<NamedFormula>, soft: Vec<NamedFormula>) -> Result<Self, Stage1Error> {
        let mut seen = std::collections::BTreeSet::new();
        for f in hard.iter().chain(&soft) {
            if !seen.insert(f.name.as_str()) {
                return Err(Stage1Error::Invalid(format!("duplicate spec name `{}`", f.name)));
            }
        }
        Ok(Self { hard, soft })
    }

    pub fn hard(&self) -> &[NamedFormula] {
        &self.hard
    }

    pub fn soft(&self) -> &[NamedFormula] {
        &self.soft
    }

    pub fn soft_names(&self) -> Vec<String> {
        self.soft.iter().map(|f| f.name.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Options {
    pub solver: SolverConfig,
    /// Re-optimize the nominal cost among minimal relaxations.
    pub tie_break: bool,
    /// Absolute slack on the total relaxation in the tie-break pass.
    pub tie_tol: f64,
    /// Node budget of the tie-break pass; the incumbent is kept when hit.
    #[serde(default = "default_tie_nodes")]
    pub tie_node_limit: usize,
    /// Robustness floor for `G` hard specs after the first sample.
    #[serde(default)]
    pub hard_margin: f64,
}

impl Default for Stage1Options {
    fn default() -> Self {
        // tight enough that the reported minimum sits well inside a 1e-6
        // tolerance of the true optimum
        let solver = SolverConfig { gap_tol: 1e-9, ..SolverConfig::default() };
        Self { solver, tie_break: true, tie_tol: 1e-7, tie_node_limit: default_tie_nodes(), hard_margin: 0.0 }
    }
}

fn default_tie_nodes() -> usize {
    2000
}

/// A model with named signals and a nominal cost.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: Model,
    pub signals: SignalTable,
    pub cost: LinExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftHandling {
    Enforce,
    Relax,
}

/// A plant with all specifications compiled in.
#[derive(Debug, Clone)]
pub struct SpecModel {
    pub model: Model,
    pub encoder: RobustnessEncoder,
    pub cost: LinExpr,
    /// One relaxation variable per soft spec; empty when soft specs are enforced.
    pub delta: Vec<VarRef>,
    pub delta_sum: LinExpr,
}

fn require_at_least(m: &mut Model, enc: Encoded, slack: Option<VarRef>) -> Result<(), MilpError> {
    match enc {
        Encoded::PosInf => Ok(()),
        Encoded::NegInf => {
            // an empty row with a positive lower bound is never satisfiable
            m.add_constraint(LinExpr::new(), Relation::Ge, 1.0).map(|_| ())
        }
        Encoded::Expr(e) => {
            let e = match slack {
                Some(d) => e + d,
                None => e,
            };
            m.add_constraint(e, Relation::Ge, 0.0).map(|_| ())
        }
    }
}

fn shift(e: Encoded, c: f64) -> Encoded {
    match e {
        Encoded::Expr(x) => Encoded::Expr(x + c),
        other => other,
    }
}

/// Compiles hard specs as `rho >= 0` and soft specs as `rho >= 0` or
/// `rho >= -delta` depending on `soft`.
pub fn attach_specs(
    plant: Plant,
    specs: &SpecSet,
    soft: SoftHandling,
    cfg: &SolverConfig,
) -> Result<SpecModel, Stage1Error> {
    attach_specs_with_margin(plant, specs, soft, cfg, 0.0)
}

/// As [`attach_specs`], but a hard spec of the form `G[a,b](phi)` must hold
/// with robustness at least `hard_margin` at every sample after the first.
/// The first sample is fixed by the initial state and keeps the plain bound.
pub fn attach_specs_with_margin(
    plant: Plant,
    specs: &SpecSet,
    soft: SoftHandling,
    cfg: &SolverConfig,
    hard_margin: f64,
) -> Result<SpecModel, Stage1Error> {
    let Plant { mut model, signals, cost } = plant;
    let grid = signals.grid();
    let mut encoder = RobustnessEncoder::new(signals, *cfg, Polarity::LowerBound);
    for f in specs.hard() {
        match f.formula.to_nnf() {
            Formula::Always(iv, inner) if hard_margin != 0.0 => {
                let window = interval_to_indices(iv, grid, 0);
                if window.is_empty() {
                    return Err(StlError::EmptyWindow { a: iv.a(), b: iv.b(), t_index: 0 }.into());
                }
                for k in window {
                    let e = encoder.encode(&mut model, &inner, k)?;
                    let floor = if k == 0 { 0.0 } else { hard_margin };
                    require_at_least(&mut model, shift(e, -floor), None)?;
                }
            }
            _ => {
                let e = encoder.encode(&mut model, &f.formula, 0)?;
                require_at_least(&mut model, e, None)?;
            }
        }
    }
    let mut delta = Vec::new();
    let mut delta_sum = LinExpr::new();
    for f in specs.soft() {
        let e = encoder.encode(&mut model, &f.formula, 0)?;
        match soft {
            SoftHandling::Enforce => require_at_least(&mut model, e, None)?,
            SoftHandling::Relax => {
                let d = model.add_continuous(0.0, f64::INFINITY, format!("delta_{}", f.name))?;
                delta_sum.add_term(d, 1.0);
                delta.push(d);
                require_at_least(&mut model, e, Some(d))?;
            }
        }
    }
    Ok(SpecModel { model, encoder, cost, delta, delta_sum })
}

/// Minimal relaxation on a generic plant.
#[derive(Debug, Clone)]
pub struct Relaxed {
    pub solution: MilpSolution,
    /// All signals evaluated at the solution.
    pub trace: Trace,
    /// Per soft spec, `max(0, -rho)` from the monitor on `trace`.
    pub deltas: Vec<f64>,
    pub delta_min: f64,
}

fn usable(sol: &MilpSolution, what: &str) -> Result<bool, Stage1Error> {
    match sol.status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::NodeLimit if sol.has_point() => {
            log::warn!("{what}: node limit reached, using best incumbent");
            Ok(true)
        }
        SolveStatus::NodeLimit => Err(Stage1Error::SolverLimit(what.to_string())),
        SolveStatus::Unbounded => Err(Stage1Error::Invalid(format!("{what}: unbounded objective"))),
    }
}

/// Monitor-side relaxation levels of the soft specs on a trace.
pub fn monitor_deltas(specs: &SpecSet, trace: &Trace) -> Result<Vec<f64>, StlError> {
    specs
        .soft()
        .iter()
        .map(|f| Ok((-robustness(&f.formula, trace, 0)?).max(0.0)))
        .collect()
}

/// Minimizes the total relaxation; `None` means the hard specs alone are
/// unsatisfiable.
pub fn minimal_relaxation(
    sm: &SpecModel,
    specs: &SpecSet,
    opts: &Stage1Options,
) -> Result<Option<Relaxed>, Stage1Error> {
    if sm.delta.len() != specs.soft().len() {
        return Err(Stage1Error::Invalid("spec model was built without relaxation variables".into()));
    }
    let mut model = sm.model.clone();
    model.set_objective(Sense::Minimize, sm.delta_sum.clone())?;
    let first = solve(&model, &opts.solver)?;
    if !usable(&first, "minimal relaxation")? {
        return Ok(None);
    }
    let mut best = first;
    if opts.tie_break && !sm.cost.is_constant() {
        let bound = best.objective_value.max(0.0) + opts.tie_tol;
        model.add_constraint(sm.delta_sum.clone(), Relation::Le, bound)?;
        model.set_objective(Sense::Minimize, sm.cost.clone())?;
        let cfg = SolverConfig { node_limit: opts.tie_node_limit, ..opts.solver };
        let second = solve_with_start(&model, &cfg, Some(&best.values))?;
        if second.has_point() && second.status != SolveStatus::Infeasible {
            best = second;
        }
    }
    let trace = sm.encoder.signals().to_trace(&best.values)?;
    let deltas = monitor_deltas(specs, &trace)?;
    let delta_min = deltas.iter().sum();
    Ok(Some(Relaxed { solution: best, trace, deltas, delta_min }))
}

/// Solves with every spec enforced; `None` when that is infeasible.
pub fn solve_strict(sm: &SpecModel, opts: &SolverConfig) -> Result<Option<MilpSolution>, Stage1Error> {
    let mut model = sm.model.clone();
    model.set_objective(Sense::Minimize, sm.cost.clone())?;
    let sol = solve(&model, opts)?;
    Ok(if usable(&sol, "nominal MPC")? { Some(sol) } else { None })
}

/// Linear stage-cost descriptor for the vehicle MPC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalObjective {
    #[serde(default = "one")]
    pub accel_weight: f64,
    #[serde(default = "one")]
    pub slip_weight: f64,
    /// Terminal L1 distance to this point.
    #[serde(default)]
    pub goal: Option<[f64; 2]>,
    #[serde(default)]
    pub goal_weight: f64,
    /// Lateral L1 deviation from this line at every step.
    #[serde(default)]
    pub lane_y: Option<f64>,
    #[serde(default)]
    pub lane_weight: f64,
    /// L1 deviation from this speed at every step.
    #[serde(default)]
    pub speed_ref: Option<f64>,
    #[serde(default)]
    pub speed_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for NominalObjective {
    fn default() -> Self {
        Self {
            accel_weight: 1.0,
            slip_weight: 1.0,
            goal: None,
            goal_weight: 0.0,
            lane_y: None,
            lane_weight: 0.0,
            speed_ref: None,
            speed_weight: 0.0,
        }
    }
}

/// Box on the planar pose used to bound the MILP state variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBounds {
    pub px: [f64; 2],
    pub py: [f64; 2],
    pub theta: [f64; 2],
}

impl Default for StateBounds {
    fn default() -> Self {
        Self { px: [-500.0, 500.0], py: [-500.0, 500.0], theta: [-std::f64::consts::PI, std::f64::consts::PI] }
    }
}

#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub grid: TimeGrid,
    pub x0: VehicleState,
    pub params: VehicleParams,
    pub linear_model: Vec<AffineStep>,
    pub state_bounds: StateBounds,
    pub objective: NominalObjective,
    /// Predicted agent signals, entering predicates as constants.
    pub exogenous: Option<Trace>,
}

impl MpcProblem {
    pub fn validate(&self) -> Result<(), Stage1Error> {
        if self.linear_model.len() + 1 != self.grid.steps {
            return Err(Stage1Error::Invalid(format!(
                "{} affine steps for a grid of {} samples",
                self.linear_model.len(),
                self.grid.steps
            )));
        }
        if !self.x0.is_finite() {
            return Err(Stage1Error::Invalid("initial state is not finite".into()));
        }
        self.params.validate().map_err(Stage1Error::Invalid)?;
        if let Some(ex) = &self.exogenous {
            if !crate::stl::same_grid(ex.grid(), self.grid) {
                return Err(Stage1Error::Invalid("exogenous trace is on a different grid".into()));
            }
        }
        Ok(())
    }
}

/// Ego state signal names, in state-vector order.
pub const STATE_SIGNALS: [&str; 4] = ["px", "py", "theta", "v"];

#[derive(Debug, Clone)]
pub struct VehiclePlant {
    pub plant: Plant,
    pub x: Vec<[VarRef; 4]>,
    pub u: Vec<[VarRef; 2]>,
}

fn abs_term(m: &mut Model, e: LinExpr, name: String) -> Result<VarRef, MilpError> {
    let s = m.add_continuous(0.0, f64::INFINITY, name)?;
    m.add_constraint(LinExpr::from(s) - e.clone(), Relation::Ge, 0.0)?;
    m.add_constraint(LinExpr::from(s) + e, Relation::Ge, 0.0)?;
    Ok(s)
}

/// Per-step state intervals: the state box intersected with the interval
/// image of the affine dynamics under the input box. An empty intersection
/// falls back to the box and leaves infeasibility to the solver.
pub fn reachable_boxes(prob: &MpcProblem) -> Vec<[[f64; 2]; 4]> {
    let p = &prob.params;
    let b = &prob.state_bounds;
    let boxes = [b.px, b.py, b.theta, [0.0, p.v_max]];
    let ubox = [[p.a_min, p.a_max], [p.beta_min, p.beta_max]];
    let x0 = prob.x0.to_array();
    let mut out = vec![x0.map(|v| [v, v])];
    for step in &prob.linear_model {
        let prev = out[out.len() - 1];
        let mut next = [[0.0; 2]; 4];
        for i in 0..4 {
            let (mut lo, mut hi) = (step.c[i], step.c[i]);
            let coeffs = (0..4).map(|j| (step.a[i][j], prev[j])).chain((0..2).map(|j| (step.b[i][j], ubox[j])));
            for (a, [l, h]) in coeffs {
                let (x, y) = (a * l, a * h);
                lo += x.min(y);
                hi += x.max(y);
            }
            let (l, h) = (lo.max(boxes[i][0]), hi.min(boxes[i][1]));
            next[i] = if l <= h { [l, h] } else { boxes[i] };
        }
        out.push(next);
    }
    out
}

/// Builds dynamics, input bounds, signals and the nominal cost.
pub fn build_plant(prob: &MpcProblem) -> Result<VehiclePlant, Stage1Error> {
    prob.validate()?;
    let p = &prob.params;
    let mut m = Model::new();
    let n = prob.grid.steps;
    let mut x = Vec::with_capacity(n);
    let reach = reachable_boxes(prob);
    for (t, bounds) in reach.iter().enumerate() {
        let mut row = Vec::with_capacity(4);
        for (i, &[lo, hi]) in bounds.iter().enumerate() {
            row.push(m.add_continuous(lo, hi, format!("{}_{t}", STATE_SIGNALS[i]))?);
        }
        x.push([row[0], row[1], row[2], row[3]]);
    }
    let mut u = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let a = m.add_continuous(p.a_min, p.a_max, format!("a_{t}"))?;
        let beta = m.add_continuous(p.beta_min, p.beta_max, format!("beta_{t}"))?;
        u.push([a, beta]);
    }
    for (t, step) in prob.linear_model.iter().enumerate() {
        for i in 0..4 {
            let mut e = LinExpr::from(x[t + 1][i]);
            for j in 0..4 {
                if step.a[i][j] != 0.0 {
                    e.add_term(x[t][j], -step.a[i][j]);
                }
            }
            for j in 0..2 {
                if step.b[i][j] != 0.0 {
                    e.add_term(u[t][j], -step.b[i][j]);
                }
            }
            m.add_constraint(e, Relation::Eq, step.c[i])?;
        }
    }

    let mut signals = SignalTable::new(prob.grid);
    for i in 0..4 {
        let col: Vec<VarRef> = x.iter().map(|r| r[i]).collect();
        signals.insert_vars(STATE_SIGNALS[i], &col)?;
    }
    if let Some(ex) = &prob.exogenous {
        for name in ex.dims() {
            signals.insert_constants(name.clone(), &ex.column(name).expect("own column"))?;
        }
    }

    let obj = &prob.objective;
    let mut cost = LinExpr::new();
    for (t, ut) in u.iter().enumerate() {
        if obj.accel_weight != 0.0 {
            let s = abs_term(&mut m, ut[0].into(), format!("abs_a_{t}"))?;
            cost.add_term(s, obj.accel_weight);
        }
        if obj.slip_weight != 0.0 {
            let s = abs_term(&mut m, ut[1].into(), format!("abs_beta_{t}"))?;
            cost.add_term(s, obj.slip_weight);
        }
    }
    if let (Some(g), true) = (obj.goal, obj.goal_weight != 0.0) {
        let last = x[n - 1];
        for (i, gi) in g.iter().enumerate() {
            let s = abs_term(&mut m, LinExpr::from(last[i]) - *gi, format!("goal_{i}"))?;
            cost.add_term(s, obj.goal_weight);
        }
    }
    for t in 1..n {
        if let (Some(y), true) = (obj.lane_y, obj.lane_weight != 0.0) {
            let s = abs_term(&mut m, LinExpr::from(x[t][1]) - y, format!("lane_{t}"))?;
            cost.add_term(s, obj.lane_weight);
        }
        if let (Some(v), true) = (obj.speed_ref, obj.speed_weight != 0.0) {
            let s = abs_term(&mut m, LinExpr::from(x[t][3]) - v, format!("speed_{t}"))?;
            cost.add_term(s, obj.speed_weight);
        }
    }
    Ok(VehiclePlant { plant: Plant { model: m, signals, cost }, x, u })
}

impl VehiclePlant {
    pub fn states(&self, values: &[f64]) -> Vec<VehicleState> {
        self.x
            .iter()
            .map(|r| VehicleState::new(values[r[0].index()], values[r[1].index()], values[r[2].index()], values[r[3].index()]))
            .collect()
    }

    pub fn inputs(&self, values: &[f64]) -> Vec<ControlInput> {
        self.u.iter().map(|r| ControlInput::new(values[r[0].index()], values[r[1].index()])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationStatus {
    FeasibleStrict,
    FeasibleRelaxed,
    HardInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationResult {
    pub status: RelaxationStatus,
    pub u_star: Vec<ControlInput>,
    pub x_star: Vec<VehicleState>,
    /// Relaxation per soft spec, in spec order.
    pub delta_star: Vec<(String, f64)>,
    pub delta_min: f64,
}

impl RelaxationResult {
    pub fn delta(&self, name: &str) -> Option<f64> {
        self.delta_star.iter().find(|(n, _)| n == name).map(|(_, d)| *d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalResult {
    pub u: Vec<ControlInput>,
    pub x: Vec<VehicleState>,
    pub cost: f64,
}

/// Nominal MPC with every spec enforced; `None` when infeasible.
pub fn solve_nominal(
    prob: &MpcProblem,
    specs: &SpecSet,
    opts: &Stage1Options,
) -> Result<Option<NominalResult>, Stage1Error> {
    let vp = build_plant(prob)?;
    let sm = attach_specs_with_margin(vp.plant.clone(), specs, SoftHandling::Enforce, &opts.solver, opts.hard_margin)?;
    Ok(solve_strict(&sm, &opts.solver)?.map(|sol| NominalResult {
        u: vp.inputs(&sol.values),
        x: vp.states(&sol.values),
        cost: sol.eval(&sm.cost),
    }))
}

/// Total monitored relaxation below this multiple of the solver's
/// feasibility tolerance counts as zero.
pub const STRICT_FACTOR: f64 = 10.0;

/// Minimal L1 relaxation of the soft specs for the vehicle MPC.
pub fn restore_feasibility(
    prob: &MpcProblem,
    specs: &SpecSet,
    opts: &Stage1Options,
) -> Result<RelaxationResult, Stage1Error> {
    let vp = build_plant(prob)?;
    let sm = attach_specs_with_margin(vp.plant.clone(), specs, SoftHandling::Relax, &opts.solver, opts.hard_margin)?;
    let names = specs.soft_names();
    Ok(match minimal_relaxation(&sm, specs, opts)? {
        None => RelaxationResult {
            status: RelaxationStatus::HardInfeasible,
            u_star: Vec::new(),
            x_star: Vec::new(),
            delta_star: names.into_iter().map(|n| (n, f64::NAN)).collect(),
            delta_min: f64::INFINITY,
        },
        Some(r) => {
            // plans meet big-M rows only up to the feasibility tolerance
            let strict = r.delta_min <= STRICT_FACTOR * opts.solver.feas_tol;
            let deltas = if strict { vec![0.0; r.deltas.len()] } else { r.deltas };
            RelaxationResult {
                status: if strict { RelaxationStatus::FeasibleStrict } else { RelaxationStatus::FeasibleRelaxed },
                u_star: vp.inputs(&r.solution.values),
                x_star: vp.states(&r.solution.values),
                delta_star: names.into_iter().zip(deltas).collect(),
                delta_min: if strict { 0.0 } else { r.delta_min },
            }
        }
    })
}
