//! Monte-Carlo collision risk `R = P * S * V` per agent.
//!
//! Agents are open-loop predictions (`x`, `y`, `vx`, `vy` columns) perturbed
//! by i.i.d. Gaussian velocity noise. Each sample draws from its own ChaCha
//! stream keyed by `(seed, agent name, sample index)` and consumes it step by
//! step, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{same_grid, Trace};

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("trace is missing column `{0}`")]
    MissingColumn(String),
    #[error("traces are on different time grids")]
    GridMismatch,
    #[error("sample never comes within the safety distance")]
    NoContact,
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Pedestrian,
    Vehicle,
    Ambulance,
    Cyclist,
    RearVehicle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub name: String,
    pub kind: AgentKind,
    pub mass: f64,
    pub kappa: f64,
    /// Predicted `x`, `y`, `vx`, `vy` over the horizon.
    pub nominal: Trace,
    pub noise_sigma: f64,
}

impl AgentModel {
    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.mass > 0.0) {
            return Err(RiskError::Invalid(format!("agent `{}` mass must be positive", self.name)));
        }
        if !(self.kappa >= 0.0) {
            return Err(RiskError::Invalid(format!("agent `{}` kappa must be non-negative", self.name)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(RiskError::Invalid(format!("agent `{}` noise must be non-negative", self.name)));
        }
        for c in ["x", "y", "vx", "vy"] {
            column(&self.nominal, c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    pub n_samples: usize,
    pub d_safe: f64,
    pub s_max: f64,
    pub seed: u64,
    pub ego_mass: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self { n_samples: 200, d_safe: 2.0, s_max: 1500.0 * 5000.0 / 6500.0 * 30.0, seed: 0, ego_mass: 1500.0 }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), RiskError> {
        if self.n_samples == 0 {
            return Err(RiskError::Invalid("n_samples must be at least 1".into()));
        }
        if !(self.d_safe > 0.0 && self.s_max > 0.0 && self.ego_mass > 0.0) {
            return Err(RiskError::Invalid("d_safe, s_max and ego_mass must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRisk {
    pub agent: String,
    pub p: f64,
    pub s: f64,
    pub v: f64,
    pub r: f64,
    pub colliding: usize,
    pub first_contact_times: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskReport {
    pub agents: Vec<AgentRisk>,
}

impl RiskReport {
    pub fn get(&self, agent: &str) -> Option<&AgentRisk> {
        self.agents.iter().find(|a| a.agent == agent)
    }

    pub fn total(&self) -> f64 {
        self.agents.iter().map(|a| a.r).sum()
    }
}

fn column(tr: &Trace, name: &str) -> Result<Vec<f64>, RiskError> {
    tr.column(name).ok_or_else(|| RiskError::MissingColumn(name.to_string()))
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key for one sample of one agent.
pub fn sample_key(seed: u64, agent: &str, sample: usize) -> u64 {
    splitmix(splitmix(seed ^ splitmix(fnv1a(agent))) ^ sample as u64)
}

/// Draws `n` perturbed trajectories with columns `x`, `y`, `vx`, `vy`.
pub fn sample_agent_trajectories(agent: &AgentModel, n: usize, seed: u64) -> Result<Vec<Trace>, RiskError> {
    agent.validate()?;
    let grid = agent.nominal.grid();
    let (x, y) = (column(&agent.nominal, "x")?, column(&agent.nominal, "y")?);
    let (vx, vy) = (column(&agent.nominal, "vx")?, column(&agent.nominal, "vy")?);
    let normal = Normal::new(0.0, agent.noise_sigma).map_err(|e| RiskError::Invalid(e.to_string()))?;
    let steps = grid.steps;
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_key(seed, &agent.name, s));
        let mut px = vec![0.0; steps];
        let mut py = vec![0.0; steps];
        let mut pvx = vec![0.0; steps];
        let mut pvy = vec![0.0; steps];
        px[0] = x[0];
        py[0] = y[0];
        for t in 0..steps {
            let (ex, ey) = if agent.noise_sigma > 0.0 {
                (normal.sample(&mut rng), normal.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            pvx[t] = vx[t] + ex;
            pvy[t] = vy[t] + ey;
            if t + 1 < steps {
                px[t + 1] = px[t] + grid.dt * pvx[t];
                py[t + 1] = py[t] + grid.dt * pvy[t];
            }
        }
        if agent.noise_sigma == 0.0 {
            // exact nominal positions, free of integration round-off
            px.copy_from_slice(&x);
            py.copy_from_slice(&y);
        }
        out.push(
            Trace::from_columns(grid, vec![("x", px), ("y", py), ("vx", pvx), ("vy", pvy)])
                .expect("consistent columns"),
        );
    }
    Ok(out)
}

fn ego_xy(ego: &Trace) -> Result<(Vec<f64>, Vec<f64>), RiskError> {
    Ok((column(ego, "px")?, column(ego, "py")?))
}

fn gaps(ego: &(Vec<f64>, Vec<f64>), sample: &Trace) -> Result<Vec<f64>, RiskError> {
    let (x, y) = (column(sample, "x")?, column(sample, "y")?);
    Ok((0..x.len()).map(|t| (ego.0[t] - x[t]).abs().max((ego.1[t] - y[t]).abs())).collect())
}

/// Fraction of samples whose L-infinity gap to the ego ever drops to `d_safe`.
pub fn collision_probability(ego: &Trace, samples: &[Trace], d_safe: f64) -> Result<(f64, Vec<usize>), RiskError> {
    if samples.is_empty() {
        return Err(RiskError::Invalid("no samples".into()));
    }
    let xy = ego_xy(ego)?;
    let mut hits = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if !same_grid(ego.grid(), s.grid()) {
            return Err(RiskError::GridMismatch);
        }
        if gaps(&xy, s)?.iter().any(|&g| g <= d_safe) {
            hits.push(i);
        }
    }
    Ok((hits.len() as f64 / samples.len() as f64, hits))
}

/// First sample index at which the gap is within `d_safe`.
pub fn first_contact_time(ego: &Trace, sample: &Trace, d_safe: f64) -> Result<usize, RiskError> {
    if !same_grid(ego.grid(), sample.grid()) {
        return Err(RiskError::GridMismatch);
    }
    gaps(&ego_xy(ego)?, sample)?
        .iter()
        .position(|&g| g <= d_safe)
        .ok_or(RiskError::NoContact)
}

pub fn reduced_mass(m1: f64, m2: f64) -> f64 {
    m1 * m2 / (m1 + m2)
}

/// Mean reduced-mass momentum change at first contact, raw and normalized.
///
/// `contacts` pairs each colliding sample with its contact index. No
/// contacts gives zero severity.
pub fn severity(
    ego: &Trace,
    agent: &AgentModel,
    contacts: &[(&Trace, usize)],
    params: &RiskParams,
) -> Result<(f64, f64), RiskError> {
    if contacts.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (v, th) = (column(ego, "v")?, column(ego, "theta")?);
    let mu = reduced_mass(params.ego_mass, agent.mass);
    let mut acc = 0.0;
    for (s, t) in contacts {
        let (vx, vy) = (column(s, "vx")?, column(s, "vy")?);
        let (evx, evy) = (v[*t] * th[*t].cos(), v[*t] * th[*t].sin());
        acc += mu * (evx - vx[*t]).hypot(evy - vy[*t]);
    }
    let raw = acc / contacts.len() as f64;
    let norm = raw / params.s_max;
    if norm > 1.0 {
        log::warn!("severity {raw:.1} for `{}` exceeds s_max {:.1}; clamped", agent.name, params.s_max);
    }
    Ok((raw, norm.clamp(0.0, 1.0)))
}

pub fn vulnerability(kappa: f64) -> Result<f64, RiskError> {
    if !(kappa >= 0.0) {
        return Err(RiskError::Invalid(format!("kappa must be non-negative, got {kappa}")));
    }
    Ok(1.0 / (1.0 + kappa))
}

/// Risk of one agent against an ego trace with `px`, `py`, `theta`, `v`.
pub fn agent_risk(ego: &Trace, agent: &AgentModel, params: &RiskParams) -> Result<AgentRisk, RiskError> {
    params.validate()?;
    if !same_grid(ego.grid(), agent.nominal.grid()) {
        return Err(RiskError::GridMismatch);
    }
    let samples = sample_agent_trajectories(agent, params.n_samples, params.seed)?;
    let (p, hits) = collision_probability(ego, &samples, params.d_safe)?;
    let mut contacts = Vec::with_capacity(hits.len());
    for &i in &hits {
        contacts.push((&samples[i], first_contact_time(ego, &samples[i], params.d_safe)?));
    }
    let (_, s) = severity(ego, agent, &contacts, params)?;
    let v = vulnerability(agent.kappa)?;
    Ok(AgentRisk {
        agent: agent.name.clone(),
        p,
        s,
        v,
        r: p * s * v,
        colliding: hits.len(),
        first_contact_times: contacts.iter().map(|c| c.1).collect(),
    })
}

pub fn evaluate_risk(ego: &Trace, agents: &[AgentModel], params: &RiskParams) -> Result<RiskReport, RiskError> {
    let agents = agents.iter().map(|a| agent_risk(ego, a, params)).collect::<Result<_, _>>()?;
    Ok(RiskReport { agents })
}
