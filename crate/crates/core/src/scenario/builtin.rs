//! Built-in experiments. Vehicle limits, masses, protection indices, the
//! safety distance, the budget, the horizon and the step are the published
//! constants; geometry, speeds, noise, margins and the cyclist's mass and
//! protection index are our own choices and are flagged in the `note` fields.

use super::*;
use crate::stage1::NominalObjective;

pub const BUILTIN_NAMES: [&str; 2] = ["exp1", "exp2"];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "exp1" => Some(builtin_exp1()),
        "exp2" => Some(builtin_exp2()),
        _ => None,
    }
}

fn params() -> VehicleParams {
    VehicleParams { l_r: 1.5, l_f: 1.5, a_min: -9.0, a_max: 4.0, beta_min: -0.2, beta_max: 0.2, v_max: 20.0 }
}

fn region(name: &str, bbox: [f64; 4], role: RegionRole) -> Region {
    Region { name: name.into(), bbox, role, note: Some("layout chosen for this reproduction".into()) }
}

fn spec(name: &str, formula: &str) -> SpecEntry {
    SpecEntry { name: name.into(), formula: formula.into() }
}

fn risk_objective(name: &str, agent: &str, margin: f64, speed_weight: f64) -> ObjectiveSpec {
    ObjectiveSpec { name: name.into(), kind: ObjectiveKind::AgentRisk { agent: agent.into(), margin, speed_weight } }
}

/// Intersection: ambulance from behind, pedestrian crossing at the entrance.
pub fn builtin_exp1() -> Scenario {
    Scenario {
        grid: GridSpec { dt: 0.2, horizon: 2.0 },
        ego: EgoSpec {
            init: VehicleState::new(0.0, 0.0, 0.0, 6.0),
            cost: NominalObjective {
                accel_weight: 0.1,
                slip_weight: 1.0,
                lane_y: Some(0.0),
                lane_weight: 0.05,
                ..NominalObjective::default()
            },
            controller: NominalController { speed: 6.0, lane_y: 0.0, k_v: 1.0, k_y: 0.1, k_theta: 0.5 },
            state_bounds: None,
            hard_margin: 0.05,
            note: Some("initial speed, cost weights, controller gains and hard margin are our choices".into()),
        },
        params: params(),
        regions: vec![
            region("alley", [-60.0, 60.0, -1.75, 1.75], RegionRole::Drivable),
            region("cross", [7.0, 17.0, -30.0, 30.0], RegionRole::Drivable),
            region("goal", [20.0, 26.0, -1.75, 1.75], RegionRole::Goal),
            region("parked_left", [-60.0, 7.0, 1.75, 3.75], RegionRole::Obstacle),
            region("parked_right", [-60.0, 7.0, -3.75, -1.75], RegionRole::Obstacle),
        ],
        agents: vec![
            AgentSpec {
                name: "ped".into(),
                kind: AgentKind::Pedestrian,
                mass: 70.0,
                kappa: 0.1,
                init: AgentInit { x: 9.0, y: -0.5, vx: 0.0, vy: 0.5 },
                noise_sigma: 0.3,
                note: Some("crossing path and walking speed are our choices".into()),
            },
            AgentSpec {
                name: "amb".into(),
                kind: AgentKind::Ambulance,
                mass: 5000.0,
                kappa: 2.3,
                init: AgentInit { x: -14.0, y: 0.0, vx: 11.0, vy: 0.0 },
                noise_sigma: 0.3,
                note: Some("initial gap and speed are our choices".into()),
            },
        ],
        hard_specs: vec![spec("drivable", "G[0,2](inside(alley) or inside(cross))")],
        soft_specs: vec![
            spec("reach", "F[0,2](inside(goal))"),
            spec("ped_safe", "G[0,2](clear(ped))"),
            spec("amb_safe", "G[0,2](clear(amb))"),
        ],
        objectives: ObjectivesSpec {
            grid_size: 3,
            items: vec![
                risk_objective("risk_ped", "ped", 1.0, 0.05),
                risk_objective("risk_amb", "amb", 1.0, 0.0),
                ObjectiveSpec { name: "progress".into(), kind: ObjectiveKind::Progress { direction: [1.0, 0.0] } },
            ],
        },
        risk: RiskSpec { n_samples: 200, d_safe: 2.0, s_max: None, ego_mass: 1500.0 },
        budget_alpha: 4.0,
        cycles: 12,
        seed: 1,
    }
}

/// Out-of-control rear vehicle; escape requires the emergency lane or the
/// opposite lane, where a cyclist approaches.
pub fn builtin_exp2() -> Scenario {
    Scenario {
        grid: GridSpec { dt: 0.2, horizon: 2.0 },
        ego: EgoSpec {
            init: VehicleState::new(0.0, 0.0, 0.0, 3.0),
            cost: NominalObjective {
                accel_weight: 0.1,
                slip_weight: 1.0,
                lane_y: Some(0.0),
                lane_weight: 0.05,
                ..NominalObjective::default()
            },
            controller: NominalController { speed: 3.0, lane_y: 0.0, k_v: 1.0, k_y: 0.1, k_theta: 0.5 },
            state_bounds: None,
            hard_margin: 0.05,
            note: Some(
                "the ego creeps toward the light instead of standing still so the first linearization keeps \
                 lateral authority; gains and weights are our choices"
                    .into(),
            ),
        },
        params: params(),
        regions: vec![
            region("road", [-60.0, 80.0, -5.25, 5.25], RegionRole::Drivable),
            region("emergency", [-60.0, 80.0, -5.25, -1.75], RegionRole::EmergencyLane),
            region("car1", [7.0, 12.0, -1.75, 1.75], RegionRole::Obstacle),
            region("car2", [14.0, 19.0, -1.75, 1.75], RegionRole::Obstacle),
        ],
        agents: vec![
            AgentSpec {
                name: "cyc".into(),
                kind: AgentKind::Cyclist,
                mass: 80.0,
                kappa: 0.2,
                init: AgentInit { x: 12.0, y: 3.5, vx: -3.0, vy: 0.0 },
                noise_sigma: 0.3,
                note: Some("mass and protection index are not published; 80 kg and 0.2 are our defaults".into()),
            },
            AgentSpec {
                name: "rear".into(),
                kind: AgentKind::RearVehicle,
                mass: 1500.0,
                kappa: 1.5,
                init: AgentInit { x: -15.0, y: 0.0, vx: 14.0, vy: 0.0 },
                noise_sigma: 0.3,
                note: Some("initial gap and speed are our choices".into()),
            },
        ],
        hard_specs: vec![spec("drivable", "G[0,2](inside(road) and outside(car1) and outside(car2))")],
        soft_specs: vec![
            spec("no_emergency_lane", "G[0,2](outside(emergency))"),
            spec("cyclist_safe", "G[0,2](clear(cyc))"),
            spec("rear_safe", "G[0,2](clear(rear))"),
        ],
        objectives: ObjectivesSpec {
            grid_size: 4,
            items: vec![risk_objective("risk_rear", "rear", 1.5, 0.0), risk_objective("risk_cyc", "cyc", 1.0, 0.0)],
        },
        risk: RiskSpec { n_samples: 200, d_safe: 2.0, s_max: None, ego_mass: 1500.0 },
        budget_alpha: 4.0,
        cycles: 10,
        seed: 2,
    }
}
