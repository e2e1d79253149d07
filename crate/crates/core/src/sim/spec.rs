use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dcpid::{CascadeGains, DerivativeForm, GainThresholds, SpacingPolicy};
use crate::dynamics::{Limits, VehicleParams};
use crate::error::{Error, Result};
use crate::lanechange::DEFAULT_EPSILON_GATE;
use crate::tracker::MpcConfig;

fn default_ts() -> f64 {
    0.02
}
fn default_length() -> f64 {
    5.0
}
fn default_wheelbase() -> f64 {
    2.7
}
fn default_epsilon_gate() -> f64 {
    DEFAULT_EPSILON_GATE
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_ts")]
    pub ts: f64,
    pub duration: f64,
    #[serde(default)]
    pub policy: SpacingPolicy,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub gains: GainsMode,
    #[serde(default)]
    pub derivative: DerivativeForm,
    #[serde(default)]
    pub controller: ControllerKind,
    #[serde(default)]
    pub overshoot: OvershootConvention,
    #[serde(default)]
    pub steady: SteadyBand,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_change: Option<LaneChangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Disturbance>,
    #[serde(default)]
    pub mpc: MpcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: u32,
    pub x: f64,
    /// Lane centre line (m).
    pub y: f64,
    pub v: f64,
    #[serde(default)]
    pub a: f64,
    pub tau: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
}

impl VehicleSpec {
    pub fn params(&self) -> VehicleParams {
        VehicleParams {
            tau: self.tau,
            length: self.length,
            wheelbase: self.wheelbase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneChangeSpec {
    /// Subject vehicle.
    pub sv: u32,
    pub target_y: f64,
    pub a_p: f64,
    /// Target-lane vehicle ahead of the merge slot; defaults to the nearest
    /// target-lane vehicle ahead of the subject vehicle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tfv: Option<u32>,
    #[serde(default = "default_epsilon_gate")]
    pub epsilon_gate: f64,
    #[serde(default)]
    pub tfv_speed_profile: SpeedProfile,
}

/// Speed schedule of a scripted vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpeedProfile {
    /// Hold the initial speed.
    #[default]
    Constant,
    /// Piecewise-linear `(t, v)` breakpoints, held beyond both ends.
    Piecewise { points: Vec<[f64; 2]> },
}

impl SpeedProfile {
    /// Target speed and its slope at time `t`.
    pub fn at(&self, t: f64, v0: f64) -> (f64, f64) {
        match self {
            SpeedProfile::Constant => (v0, 0.0),
            SpeedProfile::Piecewise { points } => {
                let Some(first) = points.first() else {
                    return (v0, 0.0);
                };
                if t <= first[0] {
                    return (first[1], 0.0);
                }
                for w in points.windows(2) {
                    let ([t0, v0], [t1, v1]) = (w[0], w[1]);
                    if t < t1 {
                        let slope = (v1 - v0) / (t1 - t0);
                        return (v0 + slope * (t - t0), slope);
                    }
                }
                (points[points.len() - 1][1], 0.0)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SpeedProfile::Constant)
    }
}

/// Additive disturbance on one vehicle's command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub vehicle: u32,
    pub eps_u: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Disturbance {
    pub fn at(&self, vehicle: u32, t: f64) -> f64 {
        if vehicle == self.vehicle && t >= self.t_start && t < self.t_end {
            self.eps_u
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainsMode {
    /// Switch between the two published gain groups on the error size.
    Auto,
    Group1,
    #[default]
    Group2,
    Custom(CascadeGains),
}

impl GainsMode {
    pub fn gains(&self, ex: f64, ev: f64) -> CascadeGains {
        match self {
            GainsMode::Auto => crate::dcpid::select_gains(ex, ev, &GainThresholds::default()),
            GainsMode::Group1 => CascadeGains::GROUP_1,
            GainsMode::Group2 => CascadeGains::GROUP_2,
            GainsMode::Custom(g) => *g,
        }
    }
}

/// Follower control law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    #[default]
    Cascade,
    SinglePid(SinglePidGains),
}

/// Single-loop PID on `e = ex + c · (v_leader - v_follower)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub c: f64,
}

impl SinglePidGains {
    /// Tuning used for every comparison in this crate.
    pub const BASELINE: Self = Self {
        kp: 0.45,
        ki: 0.0,
        kd: 0.25,
        c: 1.0,
    };
}

/// How the speed overshoot of a follower is measured against the leader's
/// steady speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OvershootConvention {
    /// The first departure fixes the approach side; overshoot is the largest
    /// excursion on the other side.
    #[default]
    CrossingBased,
    /// Only speeds above the leader's count.
    AboveOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyBand {
    pub ex: f64,
    pub ev: f64,
    /// Minimum dwell in the band (s).
    pub dwell: f64,
}

impl Default for SteadyBand {
    fn default() -> Self {
        Self {
            ex: 0.1,
            ev: 0.05,
            dwell: 1.0,
        }
    }
}

/// Where in a scenario a validation problem sits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Section {
    Top,
    Policy,
    Limits,
    Vehicle(usize),
    LaneChange,
    Disturbance,
    Mpc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub section: Section,
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.section {
            Section::Top => write!(f, "{}: {}", self.key, self.message),
            Section::Policy => write!(f, "policy.{}: {}", self.key, self.message),
            Section::Limits => write!(f, "limits.{}: {}", self.key, self.message),
            Section::Vehicle(i) => write!(f, "vehicles[{i}].{}: {}", self.key, self.message),
            Section::LaneChange => write!(f, "lane_change.{}: {}", self.key, self.message),
            Section::Disturbance => write!(f, "disturbance.{}: {}", self.key, self.message),
            Section::Mpc => write!(f, "mpc.{}: {}", self.key, self.message),
        }
    }
}

impl ScenarioSpec {
    pub fn vehicle(&self, id: u32) -> Option<&VehicleSpec> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    /// Every invariant violation, in a fixed order.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut push = |section: Section, key: &'static str, message: String| {
            out.push(Issue {
                section,
                key,
                message,
            })
        };

        if !(self.ts > 0.0 && self.ts.is_finite()) {
            push(
                Section::Top,
                "ts",
                format!("sample time must be positive, got {}", self.ts),
            );
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            push(
                Section::Top,
                "duration",
                format!("must be positive, got {}", self.duration),
            );
        }
        if self.vehicles.is_empty() {
            push(
                Section::Top,
                "vehicles",
                "at least one vehicle is required".into(),
            );
        }
        if let Err(e) = self.policy.validate() {
            push(Section::Policy, "d0", e.to_string());
        }
        if let Err(e) = self.limits.validate() {
            push(Section::Limits, "u_min", e.to_string());
        }
        if let GainsMode::Custom(g) = &self.gains {
            if let Err(e) = g.validate() {
                push(Section::Top, "gains", e.to_string());
            }
        }
        let b = &self.steady;
        if !(b.ex > 0.0 && b.ev > 0.0 && b.dwell >= 0.0) {
            push(
                Section::Top,
                "steady",
                "band widths must be positive".into(),
            );
        }

        let mut ids = HashSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            if !ids.insert(v.id) {
                push(
                    Section::Vehicle(i),
                    "id",
                    format!("duplicate vehicle id {}", v.id),
                );
            }
            if let Err(e) = v.params().validate_for(self.ts) {
                push(Section::Vehicle(i), "tau", e.to_string());
            }
            if !(v.v >= self.limits.v_min && v.v <= self.limits.v_max) {
                push(
                    Section::Vehicle(i),
                    "v",
                    format!("initial speed {} is outside the limits", v.v),
                );
            }
            if ![v.x, v.y, v.a].iter().all(|c| c.is_finite()) {
                push(Section::Vehicle(i), "x", "state must be finite".into());
            }
        }

        // no overlaps within a lane
        for (i, v) in self.vehicles.iter().enumerate() {
            for (j, w) in self.vehicles.iter().enumerate().take(i) {
                if v.y != w.y {
                    continue;
                }
                let (front, back) = if w.x >= v.x { (w, v) } else { (v, w) };
                if front.x - back.x - front.length <= 0.0 {
                    push(
                        Section::Vehicle(i),
                        "x",
                        format!(
                            "vehicle {} overlaps vehicle {} in lane y = {}",
                            v.id, self.vehicles[j].id, v.y
                        ),
                    );
                }
            }
        }

        if let Some(lc) = &self.lane_change {
            match self.vehicle(lc.sv) {
                None => push(
                    Section::LaneChange,
                    "sv",
                    format!("unknown vehicle {}", lc.sv),
                ),
                Some(sv) if sv.y == lc.target_y => push(
                    Section::LaneChange,
                    "target_y",
                    "subject vehicle is already in the target lane".into(),
                ),
                Some(_) => {}
            }
            if !(lc.a_p > 0.0 && lc.a_p.is_finite()) {
                push(
                    Section::LaneChange,
                    "a_p",
                    format!("must be positive, got {}", lc.a_p),
                );
            }
            if !(lc.epsilon_gate > 0.0) {
                push(
                    Section::LaneChange,
                    "epsilon_gate",
                    "must be positive".into(),
                );
            }
            if let Some(tfv) = lc.tfv {
                match self.vehicle(tfv) {
                    None => push(Section::LaneChange, "tfv", format!("unknown vehicle {tfv}")),
                    Some(v) if v.y != lc.target_y => push(
                        Section::LaneChange,
                        "tfv",
                        format!("vehicle {tfv} is not in the target lane"),
                    ),
                    Some(_) => {}
                }
            }
            if let SpeedProfile::Piecewise { points } = &lc.tfv_speed_profile {
                if points.is_empty() || points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    push(
                        Section::LaneChange,
                        "tfv_speed_profile",
                        "breakpoint times must be non-empty and strictly increasing".into(),
                    );
                }
            }
        }

        if let Some(d) = &self.disturbance {
            if self.vehicle(d.vehicle).is_none() {
                push(
                    Section::Disturbance,
                    "vehicle",
                    format!("unknown vehicle {}", d.vehicle),
                );
            }
            if !(d.t_end >= d.t_start) {
                push(
                    Section::Disturbance,
                    "t_end",
                    "window end precedes its start".into(),
                );
            }
        }

        if let Err(e) = self.mpc.validate() {
            push(Section::Mpc, "np", e.to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            let msg = issues
                .iter()
                .map(Issue::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Validation(msg))
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.ts).round() as usize
    }
}
