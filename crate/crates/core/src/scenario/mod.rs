//! Scenario files, the built-in experiments and the receding-horizon loop.
//!
//! Formulas in scenario files may use three shorthands that expand before
//! parsing:
//!
//! - `inside(R)`: the ego position lies in region `R`
//! - `outside(R)`: the ego position lies outside region `R`
//! - `clear(A)` or `clear(A, d)`: box clearance to agent `A` is at least `d`
//!   (default: the risk `d_safe`)

mod builtin;
mod log;
mod sim;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{VehicleParams, VehicleState};
use crate::risk::{reduced_mass, AgentKind, AgentModel, RiskParams};
use crate::stage1::{NamedFormula, NominalObjective, SpecSet, StateBounds, STATE_SIGNALS};
use crate::stage2::{agent_signals, clearance_text, ObjectiveKind, ObjectiveSpec, Stage2Options};
use crate::stl::{parse_formula, Formula, TimeGrid, Trace};

pub use builtin::{builtin, builtin_exp1, builtin_exp2, BUILTIN_NAMES};
pub use log::*;
pub use sim::{nominal_controls, predict_agents, run_receding_horizon, Mode, SimError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Schema(String),
    #[error("formula `{name}`: {msg}")]
    Formula { name: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRole {
    Drivable,
    Goal,
    EmergencyLane,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    /// `[x_lo, x_hi, y_lo, y_hi]` in meters.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub role: RegionRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, x1, y0, y1] = self.bbox;
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dt: f64,
    pub horizon: f64,
}

impl GridSpec {
    pub fn time_grid(&self) -> Result<TimeGrid, ScenarioError> {
        TimeGrid::with_horizon(self.dt, self.horizon).map_err(|e| ScenarioError::Schema(format!("grid: {e}")))
    }
}

/// Lane-keeping speed tracker used as the selection reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalController {
    pub speed: f64,
    pub lane_y: f64,
    pub k_v: f64,
    pub k_y: f64,
    pub k_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub init: VehicleState,
    #[serde(default)]
    pub cost: NominalObjective,
    pub controller: NominalController,
    #[serde(default)]
    pub state_bounds: Option<StateBounds>,
    /// Robustness floor for hard `G` specs after the first sample.
    #[serde(default)]
    pub hard_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentInit {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub kind: AgentKind,
    pub mass: f64,
    pub kappa: f64,
    pub init: AgentInit,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_sigma() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntry {
    pub name: String,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectivesSpec {
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    pub items: Vec<ObjectiveSpec>,
}

fn default_grid_size() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    pub d_safe: f64,
    /// Defaults to the largest reduced mass times 30 m/s.
    #[serde(default)]
    pub s_max: Option<f64>,
    pub ego_mass: f64,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub ego: EgoSpec,
    pub params: VehicleParams,
    pub regions: Vec<Region>,
    pub agents: Vec<AgentSpec>,
    pub hard_specs: Vec<SpecEntry>,
    pub soft_specs: Vec<SpecEntry>,
    pub objectives: ObjectivesSpec,
    pub risk: RiskSpec,
    pub budget_alpha: f64,
    pub cycles: usize,
    pub seed: u64,
}

fn schema(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema(msg.into())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                schema(inner.to_string())
            } else {
                schema(format!("{path}: {inner}"))
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ScenarioError> {
        self.grid.time_grid()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.time_grid()?;
        self.params.validate().map_err(|e| schema(format!("params: {e}")))?;
        if !self.ego.init.is_finite() {
            return Err(schema("ego.init: state must be finite"));
        }
        if !(self.ego.hard_margin >= 0.0) {
            return Err(schema("ego.hard_margin: must be non-negative"));
        }
        let mut names = BTreeSet::new();
        for r in &self.regions {
            let [x0, x1, y0, y1] = r.bbox;
            if !(x0 < x1 && y0 < y1) {
                return Err(schema(format!("regions.{}: box must have x_lo < x_hi and y_lo < y_hi", r.name)));
            }
            if !names.insert(r.name.as_str()) {
                return Err(schema(format!("regions: duplicate name `{}`", r.name)));
            }
        }
        let mut agents = BTreeSet::new();
        for a in &self.agents {
            if !is_ident(&a.name) {
                return Err(schema(format!("agents: `{}` is not a valid identifier", a.name)));
            }
            if !agents.insert(a.name.as_str()) {
                return Err(schema(format!("agents: duplicate name `{}`", a.name)));
            }
            if !(a.mass > 0.0 && a.kappa >= 0.0 && a.noise_sigma >= 0.0) {
                return Err(schema(format!("agents.{}: need mass > 0, kappa >= 0, noise_sigma >= 0", a.name)));
            }
        }
        if !(self.budget_alpha >= 0.0) {
            return Err(schema("budget_alpha: must be non-negative"));
        }
        if self.cycles == 0 {
            return Err(schema("cycles: must be at least 1"));
        }
        if self.objectives.grid_size < 2 {
            return Err(schema("objectives.grid_size: must be at least 2"));
        }
        if self.risk.n_samples == 0 || !(self.risk.d_safe > 0.0) || !(self.risk.ego_mass > 0.0) {
            return Err(schema("risk: need n_samples >= 1, d_safe > 0, ego_mass > 0"));
        }
        if let Some(s) = self.risk.s_max {
            if !(s > 0.0) {
                return Err(schema("risk.s_max: must be positive"));
            }
        }
        let mut objs = BTreeSet::new();
        for o in &self.objectives.items {
            if !objs.insert(o.name.as_str()) {
                return Err(schema(format!("objectives: duplicate name `{}`", o.name)));
            }
            if let ObjectiveKind::AgentRisk { agent, .. } = &o.kind {
                if !agents.contains(agent.as_str()) {
                    return Err(schema(format!("objectives.{}: unknown agent `{agent}`", o.name)));
                }
            }
        }
        self.spec_set()?;
        Ok(())
    }

    /// Parses every formula after shorthand expansion and checks its signals.
    pub fn spec_set(&self) -> Result<SpecSet, ScenarioError> {
        let mut allowed: BTreeSet<String> = STATE_SIGNALS.iter().map(|s| s.to_string()).collect();
        for a in &self.agents {
            let (x, y) = agent_signals(&a.name);
            allowed.insert(x);
            allowed.insert(y);
        }
        let compile = |e: &SpecEntry| -> Result<NamedFormula, ScenarioError> {
            let err = |msg: String| ScenarioError::Formula { name: e.name.clone(), msg };
            let text = self.expand(&e.formula).map_err(err)?;
            let f: Formula = parse_formula(&text).map_err(|x| err(x.to_string()))?;
            if let Some(d) = f.dims().into_iter().find(|d| !allowed.contains(d)) {
                return Err(err(format!("references undeclared signal `{d}`")));
            }
            Ok(NamedFormula::new(e.name.clone(), f))
        };
        let hard = self.hard_specs.iter().map(compile).collect::<Result<_, _>>()?;
        let soft = self.soft_specs.iter().map(compile).collect::<Result<_, _>>()?;
        SpecSet::new(hard, soft).map_err(|e| schema(e.to_string()))
    }

    /// Expands `inside`, `outside` and `clear` shorthands.
    pub fn expand(&self, text: &str) -> Result<String, String> {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some((pos, word)) = find_macro(rest) {
            out.push_str(&rest[..pos]);
            let after = &rest[pos + word.len()..];
            let open = after.find('(').expect("macro is followed by a parenthesis");
            let close = after.find(')').ok_or_else(|| format!("unclosed `{word}(`"))?;
            let args: Vec<&str> = after[open + 1..close].split(',').map(str::trim).collect();
            out.push_str(&self.expand_one(word, &args)?);
            rest = &after[close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    fn expand_one(&self, word: &str, args: &[&str]) -> Result<String, String> {
        match word {
            "inside" | "outside" => {
                let [name] = args else { return Err(format!("`{word}` takes one region")) };
                let r = self.region(name).ok_or_else(|| format!("undeclared region `{name}`"))?;
                let [x0, x1, y0, y1] = r.bbox;
                Ok(if word == "inside" {
                    format!("(px >= {x0} and px <= {x1} and py >= {y0} and py <= {y1})")
                } else {
                    format!("(px <= {x0} or px >= {x1} or py <= {y0} or py >= {y1})")
                })
            }
            _ => {
                let (name, d) = match args {
                    [name] => (*name, self.risk.d_safe),
                    [name, d] => (*name, d.parse::<f64>().map_err(|_| format!("bad distance `{d}`"))?),
                    _ => return Err("`clear` takes an agent and an optional distance".into()),
                };
                if !self.agents.iter().any(|a| a.name == name) {
                    return Err(format!("undeclared agent `{name}`"));
                }
                Ok(format!("({})", clearance_text(name, d)))
            }
        }
    }

    pub fn risk_params(&self, cycle: usize) -> RiskParams {
        let mu_max = self
            .agents
            .iter()
            .map(|a| reduced_mass(self.risk.ego_mass, a.mass))
            .fold(0.0, f64::max);
        RiskParams {
            n_samples: self.risk.n_samples,
            d_safe: self.risk.d_safe,
            s_max: self.risk.s_max.unwrap_or(if mu_max > 0.0 { mu_max * 30.0 } else { 1.0 }),
            seed: cycle_seed(self.seed, cycle),
            ego_mass: self.risk.ego_mass,
        }
    }

    pub fn stage2_options(&self) -> Stage2Options {
        Stage2Options { grid_size: self.objectives.grid_size, hard_margin: self.ego.hard_margin, ..Stage2Options::default() }
    }

    /// Default MILP state box: the bounding box of all drivable regions.
    pub fn state_bounds(&self) -> StateBounds {
        if let Some(b) = self.ego.state_bounds {
            return b;
        }
        let mut b = StateBounds::default();
        let drivable: Vec<&Region> = self.regions.iter().filter(|r| r.role == RegionRole::Drivable).collect();
        if !drivable.is_empty() {
            b.px = [f64::INFINITY, f64::NEG_INFINITY];
            b.py = [f64::INFINITY, f64::NEG_INFINITY];
            for r in drivable {
                b.px = [b.px[0].min(r.bbox[0]), b.px[1].max(r.bbox[1])];
                b.py = [b.py[0].min(r.bbox[2]), b.py[1].max(r.bbox[3])];
            }
        }
        b
    }

    /// Agent models with constant-velocity predictions from their state at `cycle`.
    pub fn agent_models(&self, cycle: usize, grid: TimeGrid) -> Vec<AgentModel> {
        let t0 = cycle as f64 * grid.dt;
        self.agents
            .iter()
            .map(|a| {
                let i = a.init;
                let (x0, y0) = (i.x + i.vx * t0, i.y + i.vy * t0);
                let n = grid.steps;
                let xs = (0..n).map(|k| x0 + i.vx * grid.time(k)).collect();
                let ys = (0..n).map(|k| y0 + i.vy * grid.time(k)).collect();
                let nominal = Trace::from_columns(
                    grid,
                    vec![("x", xs), ("y", ys), ("vx", vec![i.vx; n]), ("vy", vec![i.vy; n])],
                )
                .expect("consistent columns");
                AgentModel {
                    name: a.name.clone(),
                    kind: a.kind,
                    mass: a.mass,
                    kappa: a.kappa,
                    nominal,
                    noise_sigma: a.noise_sigma,
                }
            })
            .collect()
    }
}

fn cycle_seed(seed: u64, cycle: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(cycle as u64)
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn find_macro(text: &str) -> Option<(usize, &'static str)> {
    let bytes = text.as_bytes();
    let mut best: Option<(usize, &'static str)> = None;
    for word in ["inside", "outside", "clear"] {
        let mut from = 0;
        while let Some(off) = text[from..].find(word) {
            let pos = from + off;
            let before_ok = pos == 0 || !(bytes[pos - 1].is_ascii_alphanumeric() || bytes[pos - 1] == b'_');
            let tail = text[pos + word.len()..].trim_start();
            if before_ok && tail.starts_with('(') {
                if best.is_none_or(|(b, _)| pos < b) {
                    best = Some((pos, word));
                }
                break;
            }
            from = pos + word.len();
        }
    }
    best
}
