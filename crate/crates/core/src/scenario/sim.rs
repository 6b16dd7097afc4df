use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{CycleLog, FrontRow, SimLog};
use super::{NominalController, Scenario, ScenarioError};
use crate::dynamics::{linearize, rollout, step_discrete, ControlInput, VehicleParams, VehicleState};
use crate::risk::{evaluate_risk, AgentModel, RiskError};
use crate::stage1::{restore_feasibility, MpcProblem, RelaxationStatus, SpecSet, Stage1Error, Stage1Options};
use crate::stage2::{
    agent_signals, approximate_pareto, select_action, vehicle_plan, Candidate, Stage2Error, Stage2Problem,
};
use crate::stl::{robustness, StlError, TimeGrid, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stage1Only,
    Full,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Stage1Only => "stage1_only",
            Mode::Full => "full",
        })
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Stage1(#[from] Stage1Error),
    #[error(transparent)]
    Stage2(#[from] Stage2Error),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// Controls of the lane-keeping speed tracker rolled out over the horizon.
pub fn nominal_controls(x0: &VehicleState, c: &NominalController, p: &VehicleParams, grid: TimeGrid) -> Vec<ControlInput> {
    let mut x = *x0;
    let mut out = Vec::with_capacity(grid.steps - 1);
    for _ in 1..grid.steps {
        let a = c.k_v * (c.speed - x.v);
        let beta = -c.k_y * (x.py - c.lane_y) - c.k_theta * x.theta;
        let u = p.clamp(ControlInput::new(a, beta));
        out.push(u);
        x = step_discrete(&x, &u, grid.dt, p);
    }
    out
}

/// Agent models and the exogenous signal trace seen by the planner.
pub fn predict_agents(sc: &Scenario, cycle: usize, grid: TimeGrid) -> (Vec<AgentModel>, Option<Trace>) {
    let agents = sc.agent_models(cycle, grid);
    if agents.is_empty() {
        return (agents, None);
    }
    let mut cols = Vec::new();
    for a in &agents {
        let (x, y) = agent_signals(&a.name);
        cols.push((x, a.nominal.column("x").expect("x")));
        cols.push((y, a.nominal.column("y").expect("y")));
    }
    let tr = Trace::from_columns(grid, cols).expect("consistent columns");
    (agents, Some(tr))
}

fn plan_trace(x: &[VehicleState], grid: TimeGrid, exogenous: &Option<Trace>) -> Result<Trace, StlError> {
    let col = |f: fn(&VehicleState) -> f64| x.iter().map(f).collect::<Vec<f64>>();
    let ego = Trace::from_columns(
        grid,
        vec![("px", col(|s| s.px)), ("py", col(|s| s.py)), ("theta", col(|s| s.theta)), ("v", col(|s| s.v))],
    )?;
    match exogenous {
        Some(ex) => ego.join(ex),
        None => Ok(ego),
    }
}

fn front_rows(cycle: usize, explored: &[&Candidate], pareto_len: usize, selected: usize, delta_min: f64) -> Vec<FrontRow> {
    explored
        .iter()
        .enumerate()
        .map(|(i, c)| FrontRow {
            cycle,
            candidate: c.seq,
            pareto: i < pareto_len,
            selected: c.seq == selected,
            g_true: c.g_true.clone(),
            g_surrogate: c.g_surrogate.clone(),
            deltas: c.deltas.clone(),
            delta_sum: c.delta_sum,
            delta_min,
        })
        .collect()
}

/// Runs the closed loop; a hard-infeasible cycle stops the run and is
/// recorded in [`SimLog::aborted`].
pub fn run_receding_horizon(sc: &Scenario, mode: Mode) -> Result<SimLog, SimError> {
    sc.validate()?;
    let grid = sc.time_grid()?;
    let specs: SpecSet = sc.spec_set()?;
    let p = sc.params;
    let s1_opts = Stage1Options { hard_margin: sc.ego.hard_margin, ..Stage1Options::default() };
    let s2_opts = sc.stage2_options();
    let mut log = SimLog::new(sc, mode, &specs);
    let mut x = sc.ego.init;

    for cycle in 0..sc.cycles {
        let (agents, exogenous) = predict_agents(sc, cycle, grid);
        // linearize about the nominal controller: smooth, and close to the
        // executed motion when no spec interferes
        let nominal = nominal_controls(&x, &sc.ego.controller, &p, grid);
        let ref_x = rollout(&x, &nominal, grid.dt, &p);
        let mpc = MpcProblem {
            grid,
            x0: x,
            params: p,
            linear_model: linearize(&ref_x, &nominal, grid.dt, &p),
            state_bounds: sc.state_bounds(),
            objective: sc.ego.cost.clone(),
            exogenous: exogenous.clone(),
        };
        let s1 = restore_feasibility(&mpc, &specs, &s1_opts)?;
        if s1.status == RelaxationStatus::HardInfeasible {
            let msg = format!("cycle {cycle}: hard specifications are infeasible from state {x:?}");
            log::error!("{msg}");
            log.aborted = Some(msg);
            break;
        }
        let risk_params = sc.risk_params(cycle);

        let mut plan_u = s1.u_star.clone();
        let mut plan_x = s1.x_star.clone();
        let stage1_deltas: Vec<f64> = s1.delta_star.iter().map(|d| d.1).collect();
        let mut executed = stage1_deltas.clone();
        let mut front = Vec::new();
        if mode == Mode::Full {
            let prob = Stage2Problem {
                mpc: mpc.clone(),
                specs: specs.clone(),
                agents: agents.clone(),
                risk: risk_params,
                objectives: sc.objectives.items.clone(),
            };
            match approximate_pareto(&prob, &s1, sc.budget_alpha, &s2_opts) {
                Ok(res) => {
                    let nom: Vec<Vec<f64>> = nominal.iter().map(|u| vec![u.a, u.beta]).collect();
                    let sel = select_action(&res.pareto, &nom)?;
                    let plan = vehicle_plan(sel);
                    plan_u = plan.u;
                    plan_x = plan.x;
                    executed = sel.deltas.clone();
                    let explored: Vec<&Candidate> = res.explored().collect();
                    front = front_rows(cycle, &explored, res.pareto.len(), sel.seq, s1.delta_min);
                }
                Err(Stage2Error::NoCandidates { .. }) => {
                    log::warn!("cycle {cycle}: no Stage 2 candidate, executing the minimal relaxation");
                }
                Err(e) => return Err(e.into()),
            }
        }

        let trace = plan_trace(&plan_x, grid, &exogenous)?;
        let rho = specs
            .hard()
            .iter()
            .chain(specs.soft())
            .map(|f| robustness(&f.formula, &trace, 0))
            .collect::<Result<Vec<f64>, _>>()?;
        let risk = evaluate_risk(&trace, &agents, &risk_params)?;
        let u0 = p.clamp(plan_u[0]);
        log.cycles.push(CycleLog {
            cycle,
            time: cycle as f64 * grid.dt,
            state: x,
            control: u0,
            status: s1.status,
            delta_min: s1.delta_min,
            stage1_deltas,
            executed_deltas: executed,
            robustness: rho,
            risk,
            front,
            plan: plan_x,
        });
        x = step_discrete(&x, &u0, grid.dt, &p);
    }
    log.final_state = x;
    Ok(log)
}
