//! Shipped scenarios: the five lane-change set-ups and the platoon
//! experiments (extreme initial errors, spacing-error recovery and a leader
//! disturbance).

use super::spec::{
    ControllerKind, Disturbance, GainsMode, LaneChangeSpec, OvershootConvention, ScenarioSpec,
    SpeedProfile, SteadyBand, VehicleSpec,
};
use crate::dcpid::{desired_spacing, DerivativeForm, SpacingPolicy};
use crate::dynamics::Limits;
use crate::lanechange::DEFAULT_EPSILON_GATE;
use crate::stability::REFERENCE_TAUS;
use crate::tracker::MpcConfig;

pub const PRESET_NAMES: [&str; 8] = [
    "scenario1",
    "scenario2",
    "scenario3",
    "scenario4",
    "scenario5",
    "fig9",
    "fig11",
    "fig12",
];

pub const LEADER_TAU: f64 = 0.5;
pub const LANE_WIDTH: f64 = 3.75;
/// Planned lateral acceleration of the lane-change presets (m/s²).
pub const LANE_CHANGE_AP: f64 = 0.1;

fn base(name: &str, duration: f64, vehicles: Vec<VehicleSpec>) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        ts: 0.02,
        duration,
        policy: SpacingPolicy::default(),
        limits: Limits::default(),
        gains: GainsMode::Group2,
        derivative: DerivativeForm::PerSecond,
        controller: ControllerKind::Cascade,
        overshoot: OvershootConvention::CrossingBased,
        steady: SteadyBand::default(),
        vehicles,
        lane_change: None,
        disturbance: None,
        mpc: MpcConfig::default(),
    }
}

fn vehicle(id: u32, x: f64, y: f64, v: f64, tau: f64) -> VehicleSpec {
    VehicleSpec {
        id,
        x,
        y,
        v,
        a: 0.0,
        tau,
        length: 5.0,
        wheelbase: 2.7,
    }
}

/// Leader plus seven followers on `y = 0`, follower `i` at speed `v[i]` and
/// spacing error `ex[i]`.
fn platoon(name: &str, duration: f64, v_leader: f64, v: [f64; 7], ex: [f64; 7]) -> ScenarioSpec {
    let policy = SpacingPolicy::default();
    let mut vs = vec![vehicle(1, 0.0, 0.0, v_leader, LEADER_TAU)];
    let mut x = 0.0;
    for i in 0..7 {
        x -= 5.0 + desired_spacing(&policy, v[i]) + ex[i];
        vs.push(vehicle(i as u32 + 2, x, 0.0, v[i], REFERENCE_TAUS[i]));
    }
    // keep coordinates positive for readability of the logs
    for v in &mut vs {
        v.x -= x;
    }
    base(name, duration, vs)
}

/// Target lane `y = -1.875` holds vehicles 1–4; the subject vehicle 5
/// starts in the lane at `y = +1.875` and merges behind vehicle 2.
fn lane_change(name: &str, rows: [(f64, f64); 5], v: f64, profile: SpeedProfile) -> ScenarioSpec {
    let y_target = -LANE_WIDTH / 2.0;
    let taus = [
        LEADER_TAU,
        REFERENCE_TAUS[0],
        REFERENCE_TAUS[1],
        REFERENCE_TAUS[2],
        REFERENCE_TAUS[3],
    ];
    let vehicles = rows
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| vehicle(i as u32 + 1, x, y, v, taus[i]))
        .collect();
    let mut s = base(name, 40.0, vehicles);
    s.lane_change = Some(LaneChangeSpec {
        sv: 5,
        target_y: y_target,
        a_p: LANE_CHANGE_AP,
        tfv: Some(2),
        epsilon_gate: DEFAULT_EPSILON_GATE,
        tfv_speed_profile: profile,
    });
    s
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let (lo, hi) = (-1.875, 1.875);
    let s = match name {
        "scenario1" => lane_change(
            name,
            [(75.0, lo), (50.0, lo), (25.0, lo), (0.0, lo), (10.0, hi)],
            20.0,
            SpeedProfile::Constant,
        ),
        "scenario2" => lane_change(
            name,
            [(75.0, lo), (50.0, lo), (25.0, lo), (0.0, lo), (35.0, hi)],
            20.0,
            SpeedProfile::Constant,
        ),
        "scenario3" => lane_change(
            name,
            [(116.0, lo), (87.0, lo), (35.0, lo), (6.0, lo), (50.0, hi)],
            25.0,
            SpeedProfile::Constant,
        ),
        "scenario4" => lane_change(
            name,
            [(116.0, lo), (87.0, lo), (29.0, lo), (0.0, lo), (58.0, hi)],
            25.0,
            SpeedProfile::Piecewise {
                points: vec![[0.0, 25.0], [2.5, 20.0]],
            },
        ),
        "scenario5" => lane_change(
            name,
            [(132.0, lo), (99.0, lo), (33.0, lo), (0.0, lo), (66.0, hi)],
            30.0,
            SpeedProfile::Constant,
        ),
        "fig9" => platoon(
            name,
            60.0,
            20.0,
            [25.0; 7],
            [-10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ),
        "fig11" => platoon(
            name,
            30.0,
            20.0,
            [20.0; 7],
            [2.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
        ),
        "fig12" => {
            let mut s = platoon(name, 40.0, 20.0, [20.0; 7], [0.0; 7]);
            s.disturbance = Some(Disturbance {
                vehicle: 1,
                eps_u: 3.0,
                t_start: 6.0,
                t_end: 8.0,
            });
            s
        }
        _ => return None,
    };
    Some(s)
}
