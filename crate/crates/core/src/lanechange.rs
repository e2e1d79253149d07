//! Cooperative lane change: platoon ordering, the trigger gate, the
//! sine-curve reference path and its ride-comfort check.
//!
//! The path over one lane change of longitudinal length `M` is
//!
//! ```text
//! y(x) = y0 + yd / 2π · (θ − sin θ),   θ = 2π (x − x0) / M,
//! M    = v · sqrt(2 |yd| / a_p)
//! ```
//!
//! so slope and second derivative vanish at both ends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dcpid::{CascadePid, ControllerState, SubsystemMeasurement};
use crate::dynamics::{step_longitudinal_unchecked, Limits, LongitudinalState};
use crate::error::{ensure, Error, Result};

/// Order vehicles by remaining distance to their exit, farthest first.
/// Returns indices into `departure_distances`; ties keep ascending index.
pub fn order_platoon(departure_distances: &[f64]) -> Result<Vec<usize>> {
    for (i, d) in departure_distances.iter().enumerate() {
        ensure(*d >= 0.0 && d.is_finite(), || {
            format!("departure distance of vehicle {i} must be non-negative, got {d}")
        })?;
    }
    let mut order: Vec<usize> = (0..departure_distances.len()).collect();
    // stable sort keeps the index order on ties
    order.sort_by(|&a, &b| departure_distances[b].total_cmp(&departure_distances[a]));
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeGate {
    /// Gap from the subject vehicle to the target-lane vehicle ahead (m).
    pub d_sv: f64,
    /// Desired spacing of the subject vehicle (m).
    pub s_sv: f64,
    /// Gap from the target-lane vehicle behind to the subject vehicle (m).
    pub d_trv: f64,
    pub d0: f64,
    pub epsilon_gate: f64,
}

pub const DEFAULT_EPSILON_GATE: f64 = 0.1;

pub fn gate_check(g: &LaneChangeGate) -> bool {
    (g.d_sv - g.s_sv).abs() <= g.epsilon_gate && g.d_trv >= g.d0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub x0: f64,
    pub y0: f64,
    /// Signed lateral offset to the target lane (m).
    pub yd: f64,
    /// Speed the plan was sized for (m/s).
    pub v_plan: f64,
    /// Planned lateral acceleration parameter (m/s²).
    pub a_p: f64,
    /// Longitudinal length of the manoeuvre (m).
    pub m: f64,
}

fn length_for(v: f64, yd: f64, a_p: f64) -> f64 {
    v * (2.0 * yd.abs() / a_p).sqrt()
}

pub fn plan_trajectory(x0: f64, y0: f64, y_tfv0: f64, v: f64, a_p: f64) -> Result<TrajectoryPlan> {
    ensure(a_p > 0.0 && a_p.is_finite(), || {
        format!("a_p must be positive, got {a_p}")
    })?;
    ensure(v > 0.0 && v.is_finite(), || {
        format!("planning speed must be positive, got {v}")
    })?;
    let yd = y_tfv0 - y0;
    ensure(yd != 0.0 && yd.is_finite(), || {
        "lateral offset must be non-zero".to_string()
    })?;
    Ok(TrajectoryPlan {
        x0,
        y0,
        yd,
        v_plan: v,
        a_p,
        m: length_for(v, yd, a_p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub x_r: f64,
    pub y_r: f64,
    /// dy/dx
    pub slope: f64,
    /// d²y/dx² (1/m)
    pub curvature2: f64,
    /// Signed curvature (1/m).
    pub kappa: f64,
    /// Desired yaw (rad).
    pub phi_r: f64,
    /// Desired front wheel angle (rad).
    pub delta_fr: f64,
}

impl TrajectoryPlan {
    pub fn x_end(&self) -> f64 {
        self.x0 + self.m
    }

    pub fn y_target(&self) -> f64 {
        self.y0 + self.yd
    }

    /// Fraction of the manoeuvre completed at `x`, clamped to [0, 1].
    pub fn progress(&self, x: f64) -> f64 {
        ((x - self.x0) / self.m).clamp(0.0, 1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x0 && x <= self.x_end()
    }

    /// Resize the plan for a new speed while keeping the completed fraction
    /// at `x`: the new plan passes through the old reference point at `x`.
    pub fn replanned(&self, x: f64, v: f64) -> Result<TrajectoryPlan> {
        ensure(v > 0.0 && v.is_finite(), || {
            format!("planning speed must be positive, got {v}")
        })?;
        let s = self.progress(x);
        let m = length_for(v, self.yd, self.a_p);
        Ok(TrajectoryPlan {
            x0: x - s * m,
            v_plan: v,
            m,
            ..*self
        })
    }

    fn point_unchecked(&self, x_r: f64, wheelbase: f64) -> ReferencePoint {
        let theta = 2.0 * PI / self.m * (x_r - self.x0);
        let (sin, cos) = theta.sin_cos();
        let y_r = self.y0 + self.yd / (2.0 * PI) * (theta - sin);
        let slope = self.yd / self.m * (1.0 - cos);
        let curvature2 = self.yd.signum() * PI * self.a_p / (self.v_plan * self.v_plan) * sin;
        let kappa = curvature2 / (1.0 + slope * slope).powf(1.5);
        ReferencePoint {
            x_r,
            y_r,
            slope,
            curvature2,
            kappa,
            phi_r: slope.atan(),
            delta_fr: (wheelbase * kappa).atan(),
        }
    }

    /// Reference at `x_r`, extended as a straight line in the target lane
    /// beyond either end of the manoeuvre.
    pub fn point_extended(&self, x_r: f64, wheelbase: f64) -> ReferencePoint {
        if x_r <= self.x0 || x_r >= self.x_end() {
            let y_r = if x_r <= self.x0 {
                self.y0
            } else {
                self.y_target()
            };
            return ReferencePoint {
                x_r,
                y_r,
                slope: 0.0,
                curvature2: 0.0,
                kappa: 0.0,
                phi_r: 0.0,
                delta_fr: 0.0,
            };
        }
        self.point_unchecked(x_r, wheelbase)
    }
}

pub fn eval_reference(plan: &TrajectoryPlan, x_r: f64, wheelbase: f64) -> Result<ReferencePoint> {
    if !plan.contains(x_r) {
        return Err(Error::OutOfRange {
            value: x_r,
            min: plan.x0,
            max: plan.x_end(),
        });
    }
    Ok(plan.point_unchecked(x_r, wheelbase))
}

/// Comfortable lateral acceleration ceiling (m/s²).
pub const A_Y_MAX: f64 = 0.5;
/// Share of the ceiling usable for yaw-rate.
pub const COMFORT_SHARE: f64 = 0.85;
/// Samples along the manoeuvre for the yaw-rate sweep.
pub const COMFORT_SAMPLES: usize = 2000;

/// Published feasibility table: (speed, yaw-rate bound, a_p upper bound).
pub const REFERENCE_AP_TABLE: [(f64, f64, f64); 3] = [
    (20.0, 0.0212, 0.122),
    (25.0, 0.0170, 0.114),
    (30.0, 0.0142, 0.106),
];

pub fn omega_upper_bound(v: f64) -> f64 {
    COMFORT_SHARE * A_Y_MAX / v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComfortCheck {
    pub omega_max: f64,
    pub omega_upper: f64,
    pub feasible: bool,
}

/// Yaw-rate check for a constant-speed traversal of the plan, with
/// `a_y = v² K` and `ω = a_y / v`.
pub fn comfort_feasible(plan: &TrajectoryPlan) -> ComfortCheck {
    let v = plan.v_plan;
    let n = COMFORT_SAMPLES;
    let omega_max = (0..n)
        .map(|i| {
            let x = plan.x0 + plan.m * i as f64 / (n - 1) as f64;
            // the wheelbase does not enter the curvature
            (v * plan.point_unchecked(x, 1.0).kappa).abs()
        })
        .fold(0.0, f64::max);
    let omega_upper = omega_upper_bound(v);
    ComfortCheck {
        omega_max,
        omega_upper,
        feasible: omega_max <= omega_upper,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApGrid {
    pub step: f64,
    pub max: f64,
}

impl Default for ApGrid {
    fn default() -> Self {
        Self {
            step: 0.001,
            max: 1.0,
        }
    }
}

/// Largest grid value of `a_p` for which the manoeuvre at speed `v` over
/// lateral offset `yd` is comfortable; `None` if even the first grid value
/// fails.
pub fn feasible_ap_domain(v: f64, yd: f64, grid: &ApGrid) -> Result<Option<f64>> {
    ensure(v > 0.0, || format!("speed must be positive, got {v}"))?;
    ensure(grid.step > 0.0 && grid.max >= grid.step, || {
        format!("bad a_p grid {grid:?}")
    })?;
    let n = (grid.max / grid.step).round() as usize;
    let mut best = None;
    for k in 1..=n {
        let a_p = k as f64 * grid.step;
        let plan = plan_trajectory(0.0, 0.0, yd, v, a_p)?;
        if !comfort_feasible(&plan).feasible {
            break;
        }
        best = Some(a_p);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanOutput {
    /// Commanded acceleration of the subject vehicle (m/s²).
    pub u: f64,
    /// Longitudinal state after this tick.
    pub next: LongitudinalState,
    pub plan: TrajectoryPlan,
}

/// One tick of the executing lane change: the subject vehicle follows the
/// target-lane vehicle ahead with the cascade law, and the path is resized
/// for the resulting speed.
#[allow(clippy::too_many_arguments)]
pub fn replan_step(
    sv: &LongitudinalState,
    tfv: &LongitudinalState,
    tfv_length: f64,
    tau_sv: f64,
    pid: &CascadePid,
    state: &mut ControllerState,
    limits: &Limits,
    plan: &TrajectoryPlan,
) -> Result<ReplanOutput> {
    let m = SubsystemMeasurement {
        d: tfv.x - sv.x - tfv_length,
        v_leader: tfv.v,
        v_follower: sv.v,
    };
    let u = pid.step(&m, state).u;
    let next = step_longitudinal_unchecked(*sv, u, tau_sv, limits, pid.ts);
    let plan = if next.v > 0.0 {
        plan.replanned(sv.x, next.v)?
    } else {
        *plan
    };
    Ok(ReplanOutput { u, next, plan })
}
