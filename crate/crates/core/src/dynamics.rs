//! Kinematic bicycle model in its small-slip control-affine form.
//!
//! State is `(px, py, theta, v)`, input is `(a, beta)` with the slip angle
//! used directly as the lateral control. The same forward-Euler map drives
//! both the simulator and the affine models handed to the MILP, so the two
//! agree exactly along the linearization reference.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(px: f64, py: f64, theta: f64, v: f64) -> Self {
        Self { px, py, theta, v }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.px, self.py, self.theta, self.v]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    /// Planar velocity vector `v * (cos theta, sin theta)`.
    pub fn velocity(&self) -> (f64, f64) {
        (self.v * self.theta.cos(), self.v * self.theta.sin())
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    pub a: f64,
    pub beta: f64,
}

impl ControlInput {
    pub fn new(a: f64, beta: f64) -> Self {
        Self { a, beta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    pub l_r: f64,
    pub l_f: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Speed cap used to bound the state box of the MILP.
    #[serde(default = "default_v_max")]
    pub v_max: f64,
}

fn default_v_max() -> f64 {
    30.0
}

impl Default for VehicleParams {
    /// Rear axle 1.5 m, accel in [-9, 4] m/s^2, slip in [-0.2, 0.2] rad.
    /// The front axle distance is not part of the published constants and is
    /// set equal to the rear one.
    fn default() -> Self {
        Self {
            l_r: 1.5,
            l_f: 1.5,
            a_min: -9.0,
            a_max: 4.0,
            beta_min: -0.2,
            beta_max: 0.2,
            v_max: default_v_max(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_r > 0.0 && self.l_f > 0.0) {
            return Err("axle distances must be positive".into());
        }
        if !(self.a_min < self.a_max) {
            return Err("a_min must be below a_max".into());
        }
        if !(self.beta_min < self.beta_max) {
            return Err("beta_min must be below beta_max".into());
        }
        if !(self.v_max > 0.0) {
            return Err("v_max must be positive".into());
        }
        Ok(())
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.a.clamp(self.a_min, self.a_max),
            u.beta.clamp(self.beta_min, self.beta_max),
        )
    }
}

/// `x_{t+1} ~= a x_t + b u_t + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineStep {
    pub a: [[f64; 4]; 4],
    pub b: [[f64; 2]; 4],
    pub c: [f64; 4],
}

impl AffineStep {
    pub fn apply(&self, x: [f64; 4], u: [f64; 2]) -> [f64; 4] {
        let mut out = self.c;
        for i in 0..4 {
            for j in 0..4 {
                out[i] += self.a[i][j] * x[j];
            }
            out[i] += self.b[i][0] * u[0] + self.b[i][1] * u[1];
        }
        out
    }
}

/// Continuous-time right-hand side of the control-affine model.
pub fn continuous_derivative(x: &VehicleState, u: &ControlInput, p: &VehicleParams) -> [f64; 4] {
    let (s, c) = x.theta.sin_cos();
    [
        x.v * c - x.v * s * u.beta,
        x.v * s + x.v * c * u.beta,
        x.v / p.l_r * u.beta,
        u.a,
    ]
}

/// Slip angle produced by a front-wheel steering angle.
pub fn slip_from_steering(steer: f64, p: &VehicleParams) -> f64 {
    (p.l_r / (p.l_f + p.l_r) * steer.tan()).atan()
}

/// One forward-Euler step.
pub fn step_discrete(x: &VehicleState, u: &ControlInput, dt: f64, p: &VehicleParams) -> VehicleState {
    let d = continuous_derivative(x, u, p);
    VehicleState::new(
        x.px + dt * d[0],
        x.py + dt * d[1],
        x.theta + dt * d[2],
        x.v + dt * d[3],
    )
}

/// Simulates `inputs` from `x0`; returns `inputs.len() + 1` states.
pub fn rollout(
    x0: &VehicleState,
    inputs: &[ControlInput],
    dt: f64,
    p: &VehicleParams,
) -> Vec<VehicleState> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(*x0);
    for u in inputs {
        let next = step_discrete(out.last().expect("non-empty"), u, dt, p);
        out.push(next);
    }
    out
}

/// Analytic Jacobians of the Euler map, with offsets that make the affine
/// model exact at every reference pair.
pub fn linearize(
    ref_states: &[VehicleState],
    ref_inputs: &[ControlInput],
    dt: f64,
    p: &VehicleParams,
) -> Vec<AffineStep> {
    assert_eq!(
        ref_states.len(),
        ref_inputs.len() + 1,
        "need one more reference state than inputs"
    );
    ref_inputs
        .iter()
        .zip(ref_states)
        .map(|(u, x)| linearize_at(x, u, dt, p))
        .collect()
}

fn linearize_at(x: &VehicleState, u: &ControlInput, dt: f64, p: &VehicleParams) -> AffineStep {
    let (s, c) = x.theta.sin_cos();
    let (v, beta) = (x.v, u.beta);
    let mut a = [[0.0; 4]; 4];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    // px
    a[0][2] = dt * (-v * s - v * c * beta);
    a[0][3] = dt * (c - s * beta);
    // py
    a[1][2] = dt * (v * c - v * s * beta);
    a[1][3] = dt * (s + c * beta);
    // theta
    a[2][3] = dt * beta / p.l_r;

    let b = [
        [0.0, -dt * v * s],
        [0.0, dt * v * c],
        [0.0, dt * v / p.l_r],
        [dt, 0.0],
    ];
    let next = step_discrete(x, u, dt, p).to_array();
    let xa = x.to_array();
    let ua = [u.a, u.beta];
    let mut off = next;
    for i in 0..4 {
        for j in 0..4 {
            off[i] -= a[i][j] * xa[j];
        }
        off[i] -= b[i][0] * ua[0] + b[i][1] * ua[1];
    }
    AffineStep { a, b, c: off }
}
