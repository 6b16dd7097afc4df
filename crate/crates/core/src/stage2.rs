//! Value-aware refinement inside the relaxation budget.
//!
//! The epsilon-constraint sweep runs on any [`SpecModel`] with linear
//! surrogate objectives; true consequences are supplied by an [`Evaluator`]
//! and drive every dominance decision. [`approximate_pareto`] wires this to
//! the vehicle MPC with clearance, progress and comfort surrogates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlInput, VehicleState};
use crate::milp::{solve_with_start, Encoded, LinExpr, MilpError, Model, Relation, Sense, SolveStatus, SolverConfig, VarRef};
use crate::risk::{evaluate_risk, AgentModel, RiskError, RiskParams};
use crate::stage1::{
    attach_specs_with_margin, build_plant, monitor_deltas, MpcProblem, RelaxationResult, RelaxationStatus, SoftHandling,
    SpecModel, SpecSet, Stage1Error, STATE_SIGNALS,
};
use crate::stl::{parse_formula, robustness, Formula, StlError, Trace};

#[derive(Debug, Error)]
pub enum Stage2Error {
    #[error(transparent)]
    Stage1(#[from] Stage1Error),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("single-objective subproblem for `{0}` is infeasible")]
    AnchorInfeasible(String),
    #[error("no feasible candidate; falling back to the minimal relaxation")]
    NoCandidates { fallback: Box<RelaxationResult> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub delta_min: f64,
    pub alpha: f64,
}

impl Budget {
    pub fn new(delta_min: f64, alpha: f64) -> Result<Self, Stage2Error> {
        if !(delta_min >= 0.0 && delta_min.is_finite()) {
            return Err(Stage2Error::Invalid(format!("delta_min must be finite and non-negative, got {delta_min}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Stage2Error::Invalid(format!("alpha must be finite and non-negative, got {alpha}")));
        }
        Ok(Self { delta_min, alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Options {
    pub solver: SolverConfig,
    /// Grid points per objective.
    pub grid_size: usize,
    pub warm_start: bool,
    /// Slack below `delta_min` on the budget row; zero is always feasible
    /// because relaxation variables may exceed the violation they cover.
    pub budget_tol: f64,
    /// Weight of the nominal cost added to each surrogate objective.
    pub tie_weight: f64,
    #[serde(default)]
    pub hard_margin: f64,
}

impl Default for Stage2Options {
    fn default() -> Self {
        let solver = SolverConfig { gap_tol: 1e-4, node_limit: 5_000, ..SolverConfig::default() };
        Self { solver, grid_size: 4, warm_start: true, budget_tol: 0.0, tie_weight: 1e-2, hard_margin: 0.0 }
    }
}

/// Where a candidate came from: minimized objective and the bounds on the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub k: usize,
    pub bounds: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Position in the exploration order.
    pub seq: usize,
    pub origin: Origin,
    /// MILP point, kept for warm starts.
    pub values: Vec<f64>,
    pub trace: Trace,
    pub controls: Vec<Vec<f64>>,
    /// Monitor relaxation per soft spec.
    pub deltas: Vec<f64>,
    pub delta_sum: f64,
    pub g_true: Vec<f64>,
    pub g_surrogate: Vec<f64>,
    pub total_risk: f64,
}

impl Candidate {
    pub fn control_norm(&self) -> f64 {
        self.controls.iter().flatten().map(|u| u * u).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    pub ideal: Vec<f64>,
    pub nadir: Vec<f64>,
    pub bounds: Vec<Vec<f64>>,
}

impl EpsilonGrid {
    /// `c` evenly spaced values per objective on `[ideal, nadir]`.
    pub fn from_range(ideal: Vec<f64>, nadir: Vec<f64>, c: usize) -> Result<Self, Stage2Error> {
        if c < 2 {
            return Err(Stage2Error::Invalid("grid size must be at least 2".into()));
        }
        if ideal.len() != nadir.len() {
            return Err(Stage2Error::Invalid("ideal and nadir lengths differ".into()));
        }
        let bounds = ideal
            .iter()
            .zip(&nadir)
            .enumerate()
            .map(|(l, (&lo, &hi))| {
                let span = hi - lo;
                if span <= 1e-9 * lo.abs().max(1.0) {
                    log::info!("objective {l} is degenerate on the budget; single grid point");
                    vec![lo]
                } else {
                    (0..c).map(|i| if i + 1 == c { hi } else { lo + span * i as f64 / (c - 1) as f64 }).collect()
                }
            })
            .collect();
        Ok(Self { ideal, nadir, bounds })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoResult {
    pub names: Vec<String>,
    pub grid: EpsilonGrid,
    pub pareto: Vec<Candidate>,
    pub dominated: Vec<Candidate>,
    /// Epsilon subproblems solved by the sweep, excluding the anchors.
    pub solves: usize,
}

impl ParetoResult {
    pub fn front(&self) -> Vec<Vec<f64>> {
        self.pareto.iter().map(|c| c.g_true.clone()).collect()
    }

    pub fn explored(&self) -> impl Iterator<Item = &Candidate> {
        self.pareto.iter().chain(&self.dominated)
    }
}

/// True consequences and exact surrogate values of a solution.
pub struct Evaluation {
    pub g_true: Vec<f64>,
    pub g_surrogate: Vec<f64>,
    pub total_risk: f64,
}

pub trait Evaluator {
    fn evaluate(&self, trace: &Trace, controls: &[Vec<f64>]) -> Result<Evaluation, Stage2Error>;
}

/// Generic epsilon-constraint problem over a relaxed spec model.
pub struct EpsilonProblem<'a> {
    pub spec_model: &'a SpecModel,
    pub specs: &'a SpecSet,
    pub names: &'a [String],
    /// Upper-bounding linear surrogate per objective.
    pub surrogates: &'a [LinExpr],
    pub controls: &'a [Vec<VarRef>],
    pub evaluator: &'a dyn Evaluator,
    pub budget: Budget,
}

pub fn dominates(g1: &[f64], g2: &[f64]) -> Result<bool, Stage2Error> {
    if g1.len() != g2.len() {
        return Err(Stage2Error::Invalid(format!("objective vectors of length {} and {}", g1.len(), g2.len())));
    }
    Ok(g1.iter().zip(g2).all(|(a, b)| a <= b) && g1.iter().zip(g2).any(|(a, b)| a < b))
}

/// Splits candidates into the nondominated set and the archive.
///
/// Candidates with identical objective vectors keep one representative:
/// smallest total relaxation, then smallest control norm, then earliest.
pub fn pareto_filter(candidates: Vec<Candidate>) -> Result<(Vec<Candidate>, Vec<Candidate>), Stage2Error> {
    let n = candidates.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || !keep[i] {
                continue;
            }
            let (a, b) = (&candidates[i], &candidates[j]);
            if dominates(&b.g_true, &a.g_true)? {
                keep[i] = false;
            } else if a.g_true == b.g_true {
                let ka = (a.delta_sum, a.control_norm(), a.seq);
                let kb = (b.delta_sum, b.control_norm(), b.seq);
                if kb.partial_cmp(&ka) == Some(std::cmp::Ordering::Less) {
                    keep[i] = false;
                }
            }
        }
    }
    let mut p = Vec::new();
    let mut d = Vec::new();
    for (c, k) in candidates.into_iter().zip(keep) {
        if k {
            p.push(c)
        } else {
            d.push(c)
        }
    }
    Ok((p, d))
}

fn add_budget_rows(m: &mut Model, ep: &EpsilonProblem, opts: &Stage2Options) -> Result<(), Stage2Error> {
    let sum = &ep.spec_model.delta_sum;
    let b = ep.budget;
    m.add_named_constraint(sum.clone(), Relation::Ge, b.delta_min - opts.budget_tol, "budget_lo")?;
    m.add_named_constraint(sum.clone(), Relation::Le, b.delta_min + b.alpha, "budget_hi")?;
    Ok(())
}

fn check_problem(ep: &EpsilonProblem) -> Result<(), Stage2Error> {
    if ep.names.len() != ep.surrogates.len() || ep.names.is_empty() {
        return Err(Stage2Error::Invalid("one name per surrogate objective required".into()));
    }
    if ep.spec_model.delta.len() != ep.specs.soft().len() {
        return Err(Stage2Error::Invalid("spec model was built without relaxation variables".into()));
    }
    Ok(())
}

/// Minimizes surrogate `k` with `surrogate[l] <= eps` for each `(l, eps)`.
/// `Ok(None)` means the subproblem is infeasible.
pub fn solve_subproblem(
    ep: &EpsilonProblem,
    k: usize,
    bounds: &[(usize, f64)],
    opts: &Stage2Options,
    start: Option<&[f64]>,
    seq: usize,
) -> Result<Option<Candidate>, Stage2Error> {
    check_problem(ep)?;
    if k >= ep.surrogates.len() || bounds.iter().any(|&(l, _)| l >= ep.surrogates.len() || l == k) {
        return Err(Stage2Error::Invalid("objective index out of range".into()));
    }
    let sm = ep.spec_model;
    let mut m = sm.model.clone();
    add_budget_rows(&mut m, ep, opts)?;
    for &(l, eps) in bounds {
        let slack = opts.solver.feas_tol * eps.abs().max(1.0);
        m.add_named_constraint(ep.surrogates[l].clone(), Relation::Le, eps + slack, format!("eps_{l}"))?;
    }
    let mut obj = ep.surrogates[k].clone();
    if opts.tie_weight != 0.0 && !sm.cost.is_constant() {
        obj += sm.cost.clone().scaled(opts.tie_weight);
    }
    m.set_objective(Sense::Minimize, obj)?;
    let sol = solve_with_start(&m, &opts.solver, if opts.warm_start { start } else { None })?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::NodeLimit if sol.has_point() => log::warn!("epsilon subproblem hit the node limit"),
        SolveStatus::Unbounded => return Err(Stage2Error::Invalid("surrogate objective is unbounded".into())),
        _ => return Ok(None),
    }
    let trace = sm.encoder.signals().to_trace(&sol.values)?;
    for f in ep.specs.hard() {
        let r = robustness(&f.formula, &trace, 0)?;
        if r < -1e-6 {
            log::warn!("candidate violates hard spec `{}` by {r:.3e}; dropped", f.name);
            return Ok(None);
        }
    }
    let deltas = monitor_deltas(ep.specs, &trace)?;
    let delta_sum: f64 = deltas.iter().sum();
    if delta_sum < ep.budget.delta_min - 1e-6 {
        log::warn!("candidate relaxation {delta_sum} is below the minimum {}", ep.budget.delta_min);
    }
    let controls: Vec<Vec<f64>> =
        ep.controls.iter().map(|row| row.iter().map(|v| sol.value(*v)).collect()).collect();
    let ev = ep.evaluator.evaluate(&trace, &controls)?;
    if ev.g_true.len() != ep.surrogates.len() || ev.g_surrogate.len() != ep.surrogates.len() {
        return Err(Stage2Error::Invalid("evaluator returned the wrong number of objectives".into()));
    }
    Ok(Some(Candidate {
        seq,
        origin: Origin { k, bounds: bounds.to_vec() },
        values: sol.values,
        trace,
        controls,
        deltas,
        delta_sum,
        g_true: ev.g_true,
        g_surrogate: ev.g_surrogate,
        total_risk: ev.total_risk,
    }))
}

/// Single-objective anchors and the grid they span.
pub fn grids(ep: &EpsilonProblem, opts: &Stage2Options) -> Result<(EpsilonGrid, Vec<Candidate>), Stage2Error> {
    check_problem(ep)?;
    let m = ep.surrogates.len();
    let mut anchors = Vec::with_capacity(m);
    for k in 0..m {
        match solve_subproblem(ep, k, &[], opts, None, k)? {
            Some(c) => anchors.push(c),
            None => return Err(Stage2Error::AnchorInfeasible(ep.names[k].clone())),
        }
    }
    let ideal: Vec<f64> = (0..m).map(|l| anchors[l].g_surrogate[l]).collect();
    let nadir: Vec<f64> = (0..m)
        .map(|l| anchors.iter().map(|a| a.g_surrogate[l]).fold(ideal[l], f64::max))
        .collect();
    Ok((EpsilonGrid::from_range(ideal, nadir, opts.grid_size)?, anchors))
}

/// Epsilon-constraint sweep followed by the dominance filter.
///
/// The anchors found while building the grid join the explored set.
pub fn sweep(ep: &EpsilonProblem, opts: &Stage2Options) -> Result<ParetoResult, Stage2Error> {
    let (grid, mut explored) = grids(ep, opts)?;
    let m = ep.surrogates.len();
    let mut seq = explored.len();
    let mut solves = 0;
    for k in 0..m {
        let others: Vec<usize> = (0..m).filter(|&l| l != k).collect();
        let radix: Vec<usize> = others.iter().map(|&l| grid.bounds[l].len()).collect();
        let mut idx = vec![0usize; others.len()];
        let mut start: Option<Vec<f64>> = Some(explored[k].values.clone());
        loop {
            let bounds: Vec<(usize, f64)> = others.iter().zip(&idx).map(|(&l, &i)| (l, grid.bounds[l][i])).collect();
            solves += 1;
            if let Some(c) = solve_subproblem(ep, k, &bounds, opts, start.as_deref(), seq)? {
                seq += 1;
                start = Some(c.values.clone());
                explored.push(c);
            }
            // mixed-radix increment over the other objectives' grids
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < radix[pos] {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    let (pareto, dominated) = pareto_filter(explored)?;
    Ok(ParetoResult { names: ep.names.to_vec(), grid, pareto, dominated, solves })
}

/// Picks the nondominated candidate closest to a nominal control sequence.
pub fn select_action<'a>(pareto: &'a [Candidate], nominal: &[Vec<f64>]) -> Result<&'a Candidate, Stage2Error> {
    let deviation = |c: &Candidate| -> f64 {
        c.controls
            .iter()
            .zip(nominal)
            .map(|(u, n)| u.iter().zip(n).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum()
    };
    pareto
        .iter()
        .map(|c| (deviation(c), c.total_risk, c.seq, c))
        .min_by(|a, b| (a.0, a.1, a.2).partial_cmp(&(b.0, b.1, b.2)).unwrap_or(std::cmp::Ordering::Equal))
        .map(|t| t.3)
        .ok_or_else(|| Stage2Error::Invalid("empty Pareto set".into()))
}

// ---------------------------------------------------------------------------
// Vehicle MPC objectives

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveKind {
    /// Clearance shortfall below `d_safe + margin` plus a speed proxy.
    AgentRisk {
        agent: String,
        #[serde(default)]
        margin: f64,
        #[serde(default)]
        speed_weight: f64,
    },
    /// Negative terminal displacement along `direction`.
    Progress { direction: [f64; 2] },
    /// Sum of absolute accelerations.
    Comfort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    pub kind: ObjectiveKind,
}

/// Exogenous signal names carrying an agent's predicted position.
pub fn agent_signals(agent: &str) -> (String, String) {
    (format!("{agent}_x"), format!("{agent}_y"))
}

/// `L_inf(ego - agent) >= d` as a formula; robustness is the box gap minus `d`.
pub fn clearance_formula(agent: &str, d: f64) -> Formula {
    parse_formula(&clearance_text(agent, d)).expect("well-formed clearance formula")
}

pub fn clearance_text(agent: &str, d: f64) -> String {
    let (ax, ay) = agent_signals(agent);
    format!("(px - {ax} >= {d}) or ({ax} - px >= {d}) or (py - {ay} >= {d}) or ({ay} - py >= {d})")
}

/// Everything Stage 2 needs for one MPC cycle.
#[derive(Debug, Clone)]
pub struct Stage2Problem {
    pub mpc: MpcProblem,
    pub specs: SpecSet,
    /// Agent predictions over the MPC grid.
    pub agents: Vec<AgentModel>,
    pub risk: RiskParams,
    pub objectives: Vec<ObjectiveSpec>,
}

impl Stage2Problem {
    pub fn validate(&self) -> Result<(), Stage2Error> {
        let mut names = std::collections::BTreeSet::new();
        for o in &self.objectives {
            if !names.insert(o.name.as_str()) {
                return Err(Stage2Error::Invalid(format!("duplicate objective `{}`", o.name)));
            }
            if let ObjectiveKind::AgentRisk { agent, .. } = &o.kind {
                if !self.agents.iter().any(|a| &a.name == agent) {
                    return Err(Stage2Error::Invalid(format!("objective `{}` names unknown agent `{agent}`", o.name)));
                }
            }
            if let ObjectiveKind::Progress { direction } = &o.kind {
                if direction[0].hypot(direction[1]) == 0.0 {
                    return Err(Stage2Error::Invalid(format!("objective `{}` has a zero direction", o.name)));
                }
            }
        }
        Ok(())
    }
}

/// Candidate re-expressed as vehicle plans.
#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePlan {
    pub u: Vec<ControlInput>,
    pub x: Vec<VehicleState>,
}

pub fn vehicle_plan(c: &Candidate) -> VehiclePlan {
    let cols: Vec<Vec<f64>> = STATE_SIGNALS.iter().map(|s| c.trace.column(s).expect("state column")).collect();
    VehiclePlan {
        u: c.controls.iter().map(|u| ControlInput::new(u[0], u[1])).collect(),
        x: (0..c.trace.len()).map(|t| VehicleState::new(cols[0][t], cols[1][t], cols[2][t], cols[3][t])).collect(),
    }
}

struct VehicleEvaluator<'a> {
    prob: &'a Stage2Problem,
    clearance: Vec<Option<Formula>>,
}

impl Evaluator for VehicleEvaluator<'_> {
    fn evaluate(&self, trace: &Trace, controls: &[Vec<f64>]) -> Result<Evaluation, Stage2Error> {
        let n = trace.len();
        let mut g_true = Vec::new();
        let mut g_sur = Vec::new();
        let mut total_risk = 0.0;
        let v = trace.column("v").ok_or_else(|| StlError::UnknownDimension("v".into()))?;
        for (o, clear) in self.prob.objectives.iter().zip(&self.clearance) {
            match &o.kind {
                ObjectiveKind::AgentRisk { agent, margin, speed_weight } => {
                    let f = clear.as_ref().expect("clearance formula");
                    let mut s = 0.0;
                    for t in 0..n {
                        s += (margin - robustness(f, trace, t)?).max(0.0);
                    }
                    s += speed_weight * v[1..].iter().sum::<f64>();
                    g_sur.push(s);
                    let a = self.prob.agents.iter().find(|a| &a.name == agent).expect("validated agent");
                    let report = evaluate_risk(trace, std::slice::from_ref(a), &self.prob.risk)?;
                    let r = report.agents[0].r;
                    total_risk += r;
                    g_true.push(r);
                }
                ObjectiveKind::Progress { direction } => {
                    let g = progress_value(trace, *direction)?;
                    g_sur.push(g);
                    g_true.push(g);
                }
                ObjectiveKind::Comfort => {
                    let g: f64 = controls.iter().map(|u| u[0].abs()).sum();
                    g_sur.push(g);
                    g_true.push(g);
                }
            }
        }
        Ok(Evaluation { g_true, g_surrogate: g_sur, total_risk })
    }
}

fn unit(d: [f64; 2]) -> [f64; 2] {
    let n = d[0].hypot(d[1]);
    [d[0] / n, d[1] / n]
}

fn progress_value(trace: &Trace, direction: [f64; 2]) -> Result<f64, Stage2Error> {
    let d = unit(direction);
    let last = trace.len() - 1;
    let get = |k, c: &str| trace.get(k, c).ok_or_else(|| StlError::UnknownDimension(c.to_string()));
    Ok(-(d[0] * (get(last, "px")? - get(0, "px")?) + d[1] * (get(last, "py")? - get(0, "py")?)))
}

struct Compiled {
    sm: SpecModel,
    names: Vec<String>,
    surrogates: Vec<LinExpr>,
    controls: Vec<Vec<VarRef>>,
    clearance: Vec<Option<Formula>>,
}

fn compile(prob: &Stage2Problem, opts: &Stage2Options) -> Result<Compiled, Stage2Error> {
    prob.validate()?;
    let vp = build_plant(&prob.mpc)?;
    let mut sm = attach_specs_with_margin(vp.plant.clone(), &prob.specs, SoftHandling::Relax, &opts.solver, opts.hard_margin)?;
    let n = prob.mpc.grid.steps;
    let mut surrogates = Vec::new();
    let mut clearance = Vec::new();
    for o in &prob.objectives {
        let mut g = LinExpr::new();
        match &o.kind {
            ObjectiveKind::AgentRisk { agent, margin, speed_weight } => {
                let f = clearance_formula(agent, prob.risk.d_safe);
                for t in 0..n {
                    match sm.encoder.encode(&mut sm.model, &f, t)? {
                        Encoded::PosInf => {}
                        Encoded::NegInf => return Err(Stage2Error::Invalid("clearance is never attainable".into())),
                        Encoded::Expr(r) => {
                            let h = sm.model.add_continuous(0.0, f64::INFINITY, format!("{}_hinge_{t}", o.name))?;
                            sm.model.add_constraint(LinExpr::from(h) + r, Relation::Ge, *margin)?;
                            g.add_term(h, 1.0);
                        }
                    }
                }
                if *speed_weight != 0.0 {
                    for x in &vp.x[1..] {
                        g.add_term(x[3], *speed_weight);
                    }
                }
                clearance.push(Some(f));
            }
            ObjectiveKind::Progress { direction } => {
                let d = unit(*direction);
                let (first, last) = (vp.x[0], vp.x[n - 1]);
                g = (LinExpr::from(first[0]) - last[0]) * d[0] + (LinExpr::from(first[1]) - last[1]) * d[1];
                clearance.push(None);
            }
            ObjectiveKind::Comfort => {
                for (t, u) in vp.u.iter().enumerate() {
                    let s = sm.model.add_continuous(0.0, f64::INFINITY, format!("{}_abs_{t}", o.name))?;
                    sm.model.add_constraint(LinExpr::from(s) - u[0], Relation::Ge, 0.0)?;
                    sm.model.add_constraint(LinExpr::from(s) + u[0], Relation::Ge, 0.0)?;
                    g.add_term(s, 1.0);
                }
                clearance.push(None);
            }
        }
        surrogates.push(g);
    }
    Ok(Compiled {
        sm,
        names: prob.objectives.iter().map(|o| o.name.clone()).collect(),
        surrogates,
        controls: vp.u.iter().map(|u| u.to_vec()).collect(),
        clearance,
    })
}

fn with_problem<T>(
    prob: &Stage2Problem,
    budget: Budget,
    opts: &Stage2Options,
    f: impl FnOnce(&EpsilonProblem) -> Result<T, Stage2Error>,
) -> Result<T, Stage2Error> {
    let c = compile(prob, opts)?;
    let evaluator = VehicleEvaluator { prob, clearance: c.clearance.clone() };
    let ep = EpsilonProblem {
        spec_model: &c.sm,
        specs: &prob.specs,
        names: &c.names,
        surrogates: &c.surrogates,
        controls: &c.controls,
        evaluator: &evaluator,
        budget,
    };
    f(&ep)
}

pub fn build_grids(prob: &Stage2Problem, budget: Budget, opts: &Stage2Options) -> Result<EpsilonGrid, Stage2Error> {
    with_problem(prob, budget, opts, |ep| grids(ep, opts).map(|g| g.0))
}

pub fn solve_epsilon_subproblem(
    prob: &Stage2Problem,
    budget: Budget,
    k: usize,
    bounds: &[(usize, f64)],
    opts: &Stage2Options,
) -> Result<Option<Candidate>, Stage2Error> {
    with_problem(prob, budget, opts, |ep| solve_subproblem(ep, k, bounds, opts, None, 0))
}

/// Full Stage 2 for one cycle, given the Stage 1 outcome.
pub fn approximate_pareto(
    prob: &Stage2Problem,
    stage1: &RelaxationResult,
    alpha: f64,
    opts: &Stage2Options,
) -> Result<ParetoResult, Stage2Error> {
    if stage1.status == RelaxationStatus::HardInfeasible {
        return Err(Stage2Error::Invalid("Stage 1 found the hard specifications infeasible".into()));
    }
    let budget = Budget::new(stage1.delta_min, alpha)?;
    let fallback = || Stage2Error::NoCandidates { fallback: Box::new(stage1.clone()) };
    let result = with_problem(prob, budget, opts, |ep| sweep(ep, opts));
    match result {
        Err(Stage2Error::AnchorInfeasible(_)) => Err(fallback()),
        Ok(r) if r.pareto.is_empty() => Err(fallback()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 3.0], &[3.0, 1.0]).unwrap());
        assert!(!dominates(&[3.0, 1.0], &[1.0, 3.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn grid_examples() {
        let g = EpsilonGrid::from_range(vec![0.0, 0.0], vec![1.0, 1.0], 3).unwrap();
        assert_eq!(g.bounds, vec![vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]]);
        let g = EpsilonGrid::from_range(vec![2.0], vec![2.0], 4).unwrap();
        assert_eq!(g.bounds, vec![vec![2.0]]);
        assert!(EpsilonGrid::from_range(vec![0.0], vec![1.0], 1).is_err());
    }

    #[test]
    fn clearance_text_round_trips() {
        let f = clearance_formula("ped", 2.0);
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        let g = parse_formula(&format!("G[0,2]({})", clearance_text("ped", 2.0))).unwrap();
        match g {
            Formula::Always(_, inner) => assert_eq!(*inner, f),
            other => panic!("{other}"),
        }
    }
}
