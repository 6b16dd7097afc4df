use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sim::Mode;
use super::Scenario;
use crate::dynamics::{ControlInput, VehicleState};
use crate::risk::RiskReport;
use crate::stage1::{RelaxationStatus, SpecSet};
use crate::stage2::agent_signals;
use crate::stl::{StlError, TimeGrid, Trace};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

pub const STREAMS: [&str; 6] = ["states.csv", "controls.csv", "deltas.csv", "risks.csv", "fronts.csv", "robustness.csv"];

#[derive(Debug, Clone, PartialEq)]
pub struct CycleLog {
    pub cycle: usize,
    pub time: f64,
    /// Ego state at the start of the cycle.
    pub state: VehicleState,
    pub control: ControlInput,
    pub status: RelaxationStatus,
    pub delta_min: f64,
    pub stage1_deltas: Vec<f64>,
    /// Monitor relaxation of the executed plan.
    pub executed_deltas: Vec<f64>,
    /// Plan robustness of every spec, hard first.
    pub robustness: Vec<f64>,
    pub risk: RiskReport,
    /// Every explored Stage 2 candidate; empty in Stage 1 mode.
    pub front: Vec<FrontRow>,
    pub plan: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub mode: Mode,
    pub dt: f64,
    pub hard_names: Vec<String>,
    pub soft_names: Vec<String>,
    pub objective_names: Vec<String>,
    pub agents: Vec<(String, [f64; 4])>,
    pub cycles: Vec<CycleLog>,
    pub final_state: VehicleState,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub cycle: usize,
    pub time: f64,
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub cycle: usize,
    pub time: f64,
    pub a: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub cycle: usize,
    pub spec: String,
    pub stage1: f64,
    pub executed: f64,
    pub delta_min: f64,
    pub status: RelaxationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub cycle: usize,
    pub agent: String,
    pub p: f64,
    pub s: f64,
    pub v: f64,
    pub r: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub cycle: usize,
    pub spec: String,
    pub hard: bool,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub cycle: usize,
    pub candidate: usize,
    pub pareto: bool,
    pub selected: bool,
    pub g_true: Vec<f64>,
    pub g_surrogate: Vec<f64>,
    pub deltas: Vec<f64>,
    pub delta_sum: f64,
    pub delta_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontTable {
    pub objectives: Vec<String>,
    pub specs: Vec<String>,
    pub rows: Vec<FrontRow>,
}

impl SimLog {
    pub fn new(sc: &Scenario, mode: Mode, specs: &SpecSet) -> Self {
        Self {
            mode,
            dt: sc.grid.dt,
            hard_names: specs.hard().iter().map(|f| f.name.clone()).collect(),
            soft_names: specs.soft_names(),
            objective_names: sc.objectives.items.iter().map(|o| o.name.clone()).collect(),
            agents: sc.agents.iter().map(|a| (a.name.clone(), [a.init.x, a.init.y, a.init.vx, a.init.vy])).collect(),
            cycles: Vec::new(),
            final_state: sc.ego.init,
            aborted: None,
        }
    }

    /// Executed states including the state after the last cycle.
    pub fn states(&self) -> Vec<VehicleState> {
        self.cycles.iter().map(|c| c.state).chain([self.final_state]).collect()
    }

    /// Realized ego and agent signals sampled once per cycle.
    pub fn realized_trace(&self) -> Result<Trace, StlError> {
        let xs = self.states();
        let n = xs.len();
        let grid = TimeGrid::new(self.dt, n)?;
        let mut cols: Vec<(String, Vec<f64>)> = vec![
            ("px".into(), xs.iter().map(|s| s.px).collect()),
            ("py".into(), xs.iter().map(|s| s.py).collect()),
            ("theta".into(), xs.iter().map(|s| s.theta).collect()),
            ("v".into(), xs.iter().map(|s| s.v).collect()),
        ];
        for (name, [x, y, vx, vy]) in &self.agents {
            let (cx, cy) = agent_signals(name);
            cols.push((cx, (0..n).map(|k| x + vx * grid.time(k)).collect()));
            cols.push((cy, (0..n).map(|k| y + vy * grid.time(k)).collect()));
        }
        Trace::from_columns(grid, cols)
    }

    pub fn state_rows(&self) -> Vec<StateRow> {
        self.states()
            .iter()
            .enumerate()
            .map(|(k, s)| StateRow { cycle: k, time: k as f64 * self.dt, px: s.px, py: s.py, theta: s.theta, v: s.v })
            .collect()
    }

    pub fn control_rows(&self) -> Vec<ControlRow> {
        self.cycles
            .iter()
            .map(|c| ControlRow { cycle: c.cycle, time: c.time, a: c.control.a, beta: c.control.beta })
            .collect()
    }

    pub fn delta_rows(&self) -> Vec<DeltaRow> {
        let mut out = Vec::new();
        for c in &self.cycles {
            for (i, name) in self.soft_names.iter().enumerate() {
                out.push(DeltaRow {
                    cycle: c.cycle,
                    spec: name.clone(),
                    stage1: c.stage1_deltas[i],
                    executed: c.executed_deltas[i],
                    delta_min: c.delta_min,
                    status: c.status,
                });
            }
        }
        out
    }

    pub fn risk_rows(&self) -> Vec<RiskRow> {
        let mut out = Vec::new();
        for c in &self.cycles {
            for a in &c.risk.agents {
                out.push(RiskRow { cycle: c.cycle, agent: a.agent.clone(), p: a.p, s: a.s, v: a.v, r: a.r, k: a.colliding });
            }
        }
        out
    }

    pub fn robustness_rows(&self) -> Vec<RobustnessRow> {
        let mut out = Vec::new();
        for c in &self.cycles {
            let names = self.hard_names.iter().map(|n| (n, true)).chain(self.soft_names.iter().map(|n| (n, false)));
            for ((name, hard), rho) in names.zip(&c.robustness) {
                out.push(RobustnessRow { cycle: c.cycle, spec: name.clone(), hard, rho: *rho });
            }
        }
        out
    }

    pub fn front_table(&self) -> FrontTable {
        FrontTable {
            objectives: self.objective_names.clone(),
            specs: self.soft_names.clone(),
            rows: self.cycles.iter().flat_map(|c| c.front.iter().cloned()).collect(),
        }
    }

    /// Writes every stream into `dir`, which must exist.
    pub fn write_dir(&self, dir: &Path) -> Result<(), LogError> {
        write_rows(&dir.join("states.csv"), &self.state_rows())?;
        write_rows(&dir.join("controls.csv"), &self.control_rows())?;
        write_rows(&dir.join("deltas.csv"), &self.delta_rows())?;
        write_rows(&dir.join("risks.csv"), &self.risk_rows())?;
        write_rows(&dir.join("robustness.csv"), &self.robustness_rows())?;
        let path = dir.join("fronts.csv");
        let f = create(&path)?;
        self.front_table().write(f).map_err(|source| LogError::Csv { path: path.display().to_string(), source })
    }
}

fn create(path: &Path) -> Result<File, LogError> {
    File::create(path).map_err(|source| LogError::Io { path: path.display().to_string(), source })
}

fn open(path: &Path) -> Result<File, LogError> {
    File::open(path).map_err(|source| LogError::Io { path: path.display().to_string(), source })
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), LogError> {
    let csv_err = |source| LogError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| LogError::Io { path: path.display().to_string(), source })
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, LogError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|source| LogError::Csv { path: path.display().to_string(), source })
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

impl FrontTable {
    pub fn write<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["cycle", "candidate", "pareto", "selected"].map(String::from).to_vec();
        header.extend(self.objectives.iter().map(|o| format!("g_{o}")));
        header.extend(self.objectives.iter().map(|o| format!("s_{o}")));
        header.extend(self.specs.iter().map(|s| format!("d_{s}")));
        header.extend(["delta_sum", "delta_min"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.cycle.to_string(), r.candidate.to_string(), bool_str(r.pareto).into(), bool_str(r.selected).into()];
            rec.extend(r.g_true.iter().chain(&r.g_surrogate).chain(&r.deltas).map(|v| v.to_string()));
            rec.push(r.delta_sum.to_string());
            rec.push(r.delta_min.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R, what: &str) -> Result<Self, LogError> {
        let fmt = |msg: String| LogError::Format { path: what.to_string(), msg };
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(|source| LogError::Csv { path: what.to_string(), source })?.clone();
        let names: Vec<&str> = header.iter().collect();
        if names.len() < 6 || names[..4] != ["cycle", "candidate", "pareto", "selected"] {
            return Err(fmt("unexpected header".into()));
        }
        let pick = |prefix: &str| -> Vec<String> {
            names.iter().filter_map(|n| n.strip_prefix(prefix)).map(String::from).collect()
        };
        let objectives = pick("g_");
        let specs = pick("d_");
        let m = objectives.len();
        if pick("s_").len() != m || names.len() != 6 + 2 * m + specs.len() {
            return Err(fmt("inconsistent objective columns".into()));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|source| LogError::Csv { path: what.to_string(), source })?;
            let num = |i: usize| -> Result<f64, LogError> {
                rec[i].parse::<f64>().map_err(|_| fmt(format!("bad number `{}`", &rec[i])))
            };
            let flag = |i: usize| -> Result<bool, LogError> {
                rec[i].parse::<bool>().map_err(|_| fmt(format!("bad flag `{}`", &rec[i])))
            };
            let int = |i: usize| -> Result<usize, LogError> {
                rec[i].parse::<usize>().map_err(|_| fmt(format!("bad index `{}`", &rec[i])))
            };
            let k = specs.len();
            rows.push(FrontRow {
                cycle: int(0)?,
                candidate: int(1)?,
                pareto: flag(2)?,
                selected: flag(3)?,
                g_true: (4..4 + m).map(num).collect::<Result<_, _>>()?,
                g_surrogate: (4 + m..4 + 2 * m).map(num).collect::<Result<_, _>>()?,
                deltas: (4 + 2 * m..4 + 2 * m + k).map(num).collect::<Result<_, _>>()?,
                delta_sum: num(4 + 2 * m + k)?,
                delta_min: num(5 + 2 * m + k)?,
            });
        }
        Ok(Self { objectives, specs, rows })
    }

    pub fn read_path(path: &Path) -> Result<Self, LogError> {
        Self::read(open(path)?, &path.display().to_string())
    }
}
