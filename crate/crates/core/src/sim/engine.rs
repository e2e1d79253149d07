use std::fmt;

use serde::Serialize;

use super::metrics::{Collision, MetricsAccumulator, MetricsReport, Sample};
use super::spec::{ControllerKind, GainsMode, ScenarioSpec, SinglePidGains, SpeedProfile};
use crate::dcpid::{desired_spacing, CascadePid, ControllerState, SubsystemMeasurement};
use crate::dynamics::{
    step_kinematic, step_longitudinal_unchecked, KinematicState, LongitudinalState,
};
use crate::error::Result;
use crate::lanechange::{gate_check, plan_trajectory, replan_step, LaneChangeGate, TrajectoryPlan};
use crate::tracker::{reference_horizon, track_step};

/// Speed-tracking gain of scripted vehicles (1/s).
pub const SCRIPT_GAIN: f64 = 1.0;
/// Lateral completion tolerance on both the lane offset and the tracking error (m).
pub const COMPLETION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cooperate,
    Triggered,
    Executing,
    Merged,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Cooperate => "cooperate",
            Phase::Triggered => "triggered",
            Phase::Executing => "executing",
            Phase::Merged => "merged",
        })
    }
}

/// State of one vehicle at the start of a tick and the command it received.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub v: f64,
    pub a: f64,
    pub u: f64,
    pub ex: Option<f64>,
    pub ev: Option<f64>,
    pub lane: usize,
    pub phase: Option<Phase>,
    pub ref_x: Option<f64>,
    pub ref_y: Option<f64>,
    pub lat_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanSample {
    pub t: f64,
    pub m: f64,
    pub x0: f64,
    pub v_plan: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSample {
    pub t: f64,
    pub v: f64,
    pub delta: f64,
    pub du: [f64; 2],
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Empty unless recording was requested.
    pub series: Vec<SeriesRow>,
    pub metrics: MetricsReport,
    pub plans: Vec<PlanSample>,
    pub tracking: Vec<TrackSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Leader {
    Car(usize),
    /// The merge slot behind the target-lane vehicle ahead.
    Slot,
}

#[derive(Debug, Clone, Copy, Default)]
struct PidState {
    sum: f64,
    prev: f64,
    primed: bool,
}

#[derive(Debug, Clone)]
struct Car {
    id: u32,
    lon: LongitudinalState,
    y: f64,
    phi: f64,
    delta: f64,
    lane: usize,
    tau: f64,
    length: f64,
    wheelbase: f64,
    v0: f64,
    script: Option<SpeedProfile>,
}

#[derive(Debug, Clone)]
struct LaneChange {
    sv: usize,
    tfv: usize,
    trv: Option<usize>,
    target_lane: usize,
    target_y: f64,
    a_p: f64,
    epsilon_gate: f64,
    phase: Phase,
    plan: Option<TrajectoryPlan>,
}

struct World<'a> {
    spec: &'a ScenarioSpec,
    cars: Vec<Car>,
    links: Vec<Option<Leader>>,
    cascade: Vec<ControllerState>,
    single: Vec<PidState>,
    lc: Option<LaneChange>,
}

fn lanes_of(spec: &ScenarioSpec) -> Vec<f64> {
    let mut ys: Vec<f64> = spec.vehicles.iter().map(|v| v.y).collect();
    if let Some(lc) = &spec.lane_change {
        ys.push(lc.target_y);
    }
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys
}

impl<'a> World<'a> {
    fn new(spec: &'a ScenarioSpec) -> Self {
        let lanes = lanes_of(spec);
        let lane_index = |y: f64| {
            lanes
                .iter()
                .position(|&l| l == y)
                .expect("lane list covers every vehicle")
        };
        let mut cars: Vec<Car> = spec
            .vehicles
            .iter()
            .map(|v| Car {
                id: v.id,
                lon: LongitudinalState::new(v.x, v.v, v.a),
                y: v.y,
                phi: 0.0,
                delta: 0.0,
                lane: lane_index(v.y),
                tau: v.tau,
                length: v.length,
                wheelbase: v.wheelbase,
                v0: v.v,
                script: None,
            })
            .collect();

        let lc = spec.lane_change.as_ref().map(|lc| {
            let sv = cars.iter().position(|c| c.id == lc.sv).expect("validated");
            let target_lane = lane_index(lc.target_y);
            let in_target = |c: &Car| c.lane == target_lane;
            let tfv = match lc.tfv {
                Some(id) => cars.iter().position(|c| c.id == id).expect("validated"),
                None => nearest_ahead(&cars, cars[sv].lon.x, in_target).unwrap_or(sv),
            };
            let trv = nearest_behind(&cars, cars[tfv].lon.x, tfv, in_target);
            LaneChange {
                sv,
                tfv,
                trv,
                target_lane,
                target_y: lc.target_y,
                a_p: lc.a_p,
                epsilon_gate: lc.epsilon_gate,
                phase: Phase::Cooperate,
                plan: None,
            }
        });

        let n = cars.len();
        let mut w = World {
            spec,
            cars: Vec::new(),
            links: vec![None; n],
            cascade: vec![ControllerState::new(); n],
            single: vec![PidState::default(); n],
            lc,
        };
        // lane heads keep their speed; a profiled target-lane vehicle is scripted
        let sv = w.lc.as_ref().map(|l| l.sv);
        for i in 0..n {
            let head = !(0..n)
                .any(|j| j != i && cars[j].lane == cars[i].lane && ahead(&cars[j], &cars[i]));
            if head && Some(i) != sv {
                cars[i].script = Some(SpeedProfile::Constant);
            }
        }
        if let (Some(l), Some(spec_lc)) = (&w.lc, &spec.lane_change) {
            if !spec_lc.tfv_speed_profile.is_constant() && l.tfv != l.sv {
                cars[l.tfv].script = Some(spec_lc.tfv_speed_profile.clone());
            }
        }
        w.cars = cars;
        w.links = w.topology();
        w
    }

    /// Same-lane chains, with the cooperative-phase overrides.
    fn topology(&self) -> Vec<Option<Leader>> {
        let n = self.cars.len();
        let mut links = vec![None; n];
        for lane in 0..=self.cars.iter().map(|c| c.lane).max().unwrap_or(0) {
            let mut members: Vec<usize> = (0..n).filter(|&i| self.cars[i].lane == lane).collect();
            members.sort_by(|&a, &b| {
                self.cars[b]
                    .lon
                    .x
                    .total_cmp(&self.cars[a].lon.x)
                    .then(self.cars[a].id.cmp(&self.cars[b].id))
            });
            for k in 1..members.len() {
                if self.cars[members[k]].script.is_none() {
                    links[members[k]] = Some(Leader::Car(members[k - 1]));
                }
            }
        }
        if let Some(lc) = &self.lc {
            if lc.phase == Phase::Cooperate && lc.tfv != lc.sv {
                links[lc.sv] = Some(Leader::Car(lc.tfv));
                if let Some(trv) = lc.trv {
                    if self.cars[trv].script.is_none() {
                        links[trv] = Some(Leader::Slot);
                    }
                }
            }
        }
        links
    }

    fn relink(&mut self) {
        let links = self.topology();
        for (i, l) in links.iter().enumerate() {
            if *l != self.links[i] {
                self.cascade[i] = ControllerState::new();
                self.single[i] = PidState::default();
            }
        }
        self.links = links;
    }

    fn measure(&self, i: usize) -> Option<SubsystemMeasurement> {
        let me = &self.cars[i];
        match self.links[i]? {
            Leader::Car(j) => {
                let l = &self.cars[j];
                Some(SubsystemMeasurement {
                    d: l.lon.x - me.lon.x - l.length,
                    v_leader: l.lon.v,
                    v_follower: me.lon.v,
                })
            }
            Leader::Slot => {
                let lc = self.lc.as_ref()?;
                let (tfv, sv) = (&self.cars[lc.tfv], &self.cars[lc.sv]);
                let slot = tfv.lon.x - tfv.length - desired_spacing(&self.spec.policy, sv.lon.v);
                Some(SubsystemMeasurement {
                    d: slot - me.lon.x - sv.length,
                    v_leader: tfv.lon.v,
                    v_follower: me.lon.v,
                })
            }
        }
    }

    fn cascade_pid(&self, m: &SubsystemMeasurement) -> CascadePid {
        let ex = crate::dcpid::spacing_error(m, &self.spec.policy);
        let gains = GainsMode::gains(&self.spec.gains, ex, m.relative_speed());
        CascadePid::new(gains, self.spec.policy, self.spec.limits, self.spec.ts)
            .with_derivative(self.spec.derivative)
    }

    fn follower_command(&mut self, i: usize, m: &SubsystemMeasurement) -> f64 {
        match self.spec.controller {
            ControllerKind::Cascade => {
                let pid = self.cascade_pid(m);
                pid.step(m, &mut self.cascade[i]).u
            }
            ControllerKind::SinglePid(g) => single_pid(&g, m, self.spec, &mut self.single[i]),
        }
    }

    /// Smallest same-lane bumper gap and the pair it belongs to.
    fn min_gap(&self) -> Option<(f64, usize, usize)> {
        let n = self.cars.len();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&self.cars[i], &self.cars[j]);
                if i == j || a.lane != b.lane || !ahead(a, b) {
                    continue;
                }
                let gap = a.lon.x - b.lon.x - a.length;
                if best.is_none_or(|(g, _, _)| gap < g) {
                    best = Some((gap, i, j));
                }
            }
        }
        best
    }
}

fn ahead(a: &Car, b: &Car) -> bool {
    a.lon.x > b.lon.x || (a.lon.x == b.lon.x && a.id < b.id)
}

fn nearest_ahead(cars: &[Car], x: f64, pred: impl Fn(&Car) -> bool) -> Option<usize> {
    (0..cars.len())
        .filter(|&i| pred(&cars[i]) && cars[i].lon.x > x)
        .min_by(|&a, &b| cars[a].lon.x.total_cmp(&cars[b].lon.x))
}

fn nearest_behind(cars: &[Car], x: f64, skip: usize, pred: impl Fn(&Car) -> bool) -> Option<usize> {
    (0..cars.len())
        .filter(|&i| i != skip && pred(&cars[i]) && cars[i].lon.x < x)
        .max_by(|&a, &b| cars[a].lon.x.total_cmp(&cars[b].lon.x))
}

fn single_pid(
    g: &SinglePidGains,
    m: &SubsystemMeasurement,
    spec: &ScenarioSpec,
    st: &mut PidState,
) -> f64 {
    let e = crate::dcpid::spacing_error(m, &spec.policy) + g.c * m.relative_speed();
    if !st.primed {
        st.prev = e;
        st.primed = true;
    }
    st.sum += e * spec.ts;
    let u = g.kp * e + g.ki * st.sum + g.kd * (e - st.prev) / spec.ts;
    st.prev = e;
    spec.limits.clamp_u(u)
}

/// Run a validated scenario. A collision stops the run and is reported in
/// the metrics; everything logged up to that tick is kept.
#[allow(clippy::needless_range_loop)]
pub fn run_scenario(spec: &ScenarioSpec, opts: RunOptions) -> Result<RunOutput> {
    spec.validate()?;
    let mut w = World::new(spec);
    let ts = spec.ts;
    let v_ref = {
        let first = &w.cars[0];
        w.cars
            .iter()
            .filter(|c| c.lane == first.lane)
            .max_by(|a, b| a.lon.x.total_cmp(&b.lon.x).then(b.id.cmp(&a.id)))
            .map_or(first.v0, |c| c.v0)
    };
    let mut acc = MetricsAccumulator::new(spec.steady, spec.overshoot, v_ref, ts);
    let mut series = Vec::new();
    let mut plans = Vec::new();
    let mut tracking = Vec::new();
    let mut t0 = None;
    let mut te = None;
    let mut collision = None;
    let mut diagnostics = Vec::new();
    let n = w.cars.len();

    for k in 0..spec.steps() {
        let t = k as f64 * ts;

        // lane-change phase transitions on the measured state
        let mut phase_now = None;
        if let Some(lc) = w.lc.clone() {
            let (sv, tfv) = (&w.cars[lc.sv], &w.cars[lc.tfv]);
            match lc.phase {
                Phase::Cooperate => {
                    let gate = LaneChangeGate {
                        d_sv: tfv.lon.x - sv.lon.x - tfv.length,
                        s_sv: desired_spacing(&spec.policy, sv.lon.v),
                        d_trv: lc
                            .trv
                            .map_or(f64::INFINITY, |r| sv.lon.x - w.cars[r].lon.x - sv.length),
                        d0: spec.policy.d0,
                        epsilon_gate: lc.epsilon_gate,
                    };
                    if lc.tfv != lc.sv && gate_check(&gate) {
                        let plan = plan_trajectory(sv.lon.x, sv.y, lc.target_y, sv.lon.v, lc.a_p)?;
                        let l = w.lc.as_mut().expect("present");
                        l.phase = Phase::Executing;
                        l.plan = Some(plan);
                        w.cars[lc.sv].lane = lc.target_lane;
                        w.relink();
                        t0 = Some(t);
                        phase_now = Some(Phase::Triggered);
                    } else {
                        phase_now = Some(Phase::Cooperate);
                    }
                }
                Phase::Executing | Phase::Triggered => {
                    let plan = lc.plan.expect("executing has a plan");
                    let r = plan.point_extended(sv.lon.x, sv.wheelbase);
                    if (sv.y - plan.y_target()).abs() <= COMPLETION_TOL
                        && (sv.y - r.y_r).abs() <= COMPLETION_TOL
                    {
                        let l = w.lc.as_mut().expect("present");
                        l.phase = Phase::Merged;
                        te = Some(t);
                        let c = &mut w.cars[lc.sv];
                        c.phi = 0.0;
                        c.delta = 0.0;
                        phase_now = Some(Phase::Merged);
                    } else {
                        phase_now = Some(Phase::Executing);
                    }
                }
                Phase::Merged => phase_now = Some(Phase::Merged),
            }
        }

        if let Some((gap, i, j)) = w.min_gap() {
            acc.record_gap(gap);
            if gap <= 0.0 && collision.is_none() {
                collision = Some(Collision {
                    t,
                    leader: w.cars[i].id,
                    follower: w.cars[j].id,
                    gap,
                });
            }
        }

        // commands
        let mut u = vec![0.0; n];
        let err: Vec<_> = (0..n)
            .map(|i| {
                w.measure(i).map(|m| {
                    (
                        crate::dcpid::spacing_error(&m, &spec.policy),
                        m.relative_speed(),
                    )
                })
            })
            .collect();
        let executing_sv =
            w.lc.as_ref()
                .filter(|l| l.phase == Phase::Executing)
                .map(|l| l.sv);
        let mut sv_next = None;
        let mut reference = None;
        for i in 0..n {
            let c = &w.cars[i];
            let cmd = if let Some(profile) = &c.script {
                let (v_target, slope) = profile.at(t, c.v0);
                slope + SCRIPT_GAIN * (v_target - c.lon.v)
            } else if Some(i) == executing_sv {
                let lc = w.lc.as_ref().expect("executing");
                let m = w
                    .measure(i)
                    .expect("subject vehicle follows the vehicle ahead");
                let pid = w.cascade_pid(&m);
                let tfv = w.cars[lc.tfv].clone();
                let plan = lc.plan.expect("executing has a plan");
                let out = replan_step(
                    &c.lon,
                    &tfv.lon,
                    tfv.length,
                    c.tau,
                    &pid,
                    &mut w.cascade[i],
                    &spec.limits,
                    &plan,
                )?;
                let r = plan.point_extended(c.lon.x, c.wheelbase);
                reference = Some((r.x_r, r.y_r, c.y - r.y_r));
                sv_next = Some(out);
                out.u
            } else if let Some(m) = w.measure(i) {
                w.follower_command(i, &m)
            } else {
                0.0
            };
            let eps = spec.disturbance.map_or(0.0, |d| d.at(w.cars[i].id, t));
            u[i] = spec.limits.clamp_u(cmd + eps);
        }

        // log the state at t
        let rows: Vec<SeriesRow> = (0..n)
            .map(|i| {
                let c = &w.cars[i];
                let is_sv = w.lc.as_ref().is_some_and(|l| l.sv == i);
                let rf = if is_sv { reference } else { None };
                SeriesRow {
                    t,
                    vehicle_id: c.id,
                    x: c.lon.x,
                    y: c.y,
                    phi: c.phi,
                    v: c.lon.v,
                    a: c.lon.a,
                    u: u[i],
                    ex: err[i].map(|e| e.0),
                    ev: err[i].map(|e| e.1),
                    lane: c.lane,
                    phase: if is_sv { phase_now } else { None },
                    ref_x: rf.map(|r| r.0),
                    ref_y: rf.map(|r| r.1),
                    lat_err: rf.map(|r| r.2),
                }
            })
            .collect();
        acc.push_tick(rows.iter().map(Sample::from));
        if opts.record {
            let mut rows = rows;
            rows.sort_by_key(|r| r.vehicle_id);
            series.extend(rows);
        }
        if collision.is_some() {
            break;
        }

        // dynamics
        for i in 0..n {
            if Some(i) == executing_sv {
                continue;
            }
            let c = &mut w.cars[i];
            c.lon = step_longitudinal_unchecked(c.lon, u[i], c.tau, &spec.limits, ts);
        }
        if let (Some(i), Some(out)) = (executing_sv, sv_next) {
            let lc = w.lc.as_mut().expect("executing");
            lc.plan = Some(out.plan);
            plans.push(PlanSample {
                t,
                m: out.plan.m,
                x0: out.plan.x0,
                v_plan: out.plan.v_plan,
            });
            let c = &w.cars[i];
            let kin = KinematicState {
                x: c.lon.x,
                y: c.y,
                phi: c.phi,
                v: c.lon.v,
                delta_f: c.delta,
            };
            let refs =
                reference_horizon(&out.plan, kin.x, out.next.v, c.wheelbase, ts, spec.mpc.np);
            let cmd = track_step(
                &kin,
                &refs,
                out.next.v,
                [c.lon.v, c.delta],
                c.wheelbase,
                ts,
                &spec.mpc,
            )?;
            if cmd.held {
                diagnostics.push(format!("t = {t:.2}: tracker held the previous input"));
            }
            tracking.push(TrackSample {
                t,
                v: cmd.v,
                delta: cmd.delta,
                du: cmd.du,
                held: cmd.held,
            });
            let next = step_kinematic(kin, out.next.v, cmd.delta, c.wheelbase, ts)?;
            let c = &mut w.cars[i];
            c.lon = LongitudinalState {
                x: next.x,
                ..out.next
            };
            c.y = next.y;
            c.phi = next.phi;
            c.delta = cmd.delta;
        }
    }

    let mut metrics = acc.finish();
    metrics.t0 = t0;
    metrics.te = te;
    if collision.is_some() {
        metrics.converged = false;
    }
    metrics.collision = collision;
    if let Some(lc) = &w.lc {
        match lc.phase {
            Phase::Cooperate => diagnostics.push("lane change gate never fired".into()),
            Phase::Executing | Phase::Triggered => {
                diagnostics.push("lane change did not complete".into())
            }
            Phase::Merged => {}
        }
        if lc.tfv == lc.sv {
            diagnostics.push("no target-lane vehicle ahead of the subject vehicle".into());
        }
    }
    metrics.diagnostics = diagnostics;
    Ok(RunOutput {
        series,
        metrics,
        plans,
        tracking,
    })
}

/// The same scenario with every follower on the single-loop baseline.
pub fn single_pid_baseline(spec: &ScenarioSpec, opts: RunOptions) -> Result<RunOutput> {
    let mut s = spec.clone();
    s.controller = ControllerKind::SinglePid(SinglePidGains::BASELINE);
    run_scenario(&s, opts)
}
