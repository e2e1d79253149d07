use rayon::prelude::*;
use serde::Serialize;

use super::engine::{run_scenario, RunOptions};
use super::spec::{
    ControllerKind, GainsMode, OvershootConvention, ScenarioSpec, SteadyBand, VehicleSpec,
};
use crate::dcpid::{desired_spacing, CascadeGains, DerivativeForm, SpacingPolicy};
use crate::dynamics::Limits;
use crate::error::{ensure, Result};
use crate::tracker::MpcConfig;

/// Rectangular grid over initial spacing and speed errors, both ends
/// inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub ex_min: f64,
    pub ex_max: f64,
    pub ex_step: f64,
    pub ev_min: f64,
    pub ev_max: f64,
    pub ev_step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            ex_min: -10.0,
            ex_max: 10.0,
            ex_step: 1.0,
            ev_min: -5.0,
            ev_max: 5.0,
            ev_step: 0.5,
        }
    }
}

fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    if min == max {
        return vec![min];
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi, step) in [
            ("ex", self.ex_min, self.ex_max, self.ex_step),
            ("ev", self.ev_min, self.ev_max, self.ev_step),
        ] {
            ensure(lo.is_finite() && hi.is_finite() && lo <= hi, || {
                format!("{name} range [{lo}, {hi}] is not ordered")
            })?;
            ensure(step > 0.0 || lo == hi, || {
                format!("{name} step must be positive, got {step}")
            })?;
        }
        Ok(())
    }

    /// Points in row-major order: ex outer, ev inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let evs = axis(self.ev_min, self.ev_max, self.ev_step);
        axis(self.ex_min, self.ex_max, self.ex_step)
            .into_iter()
            .flat_map(|ex| evs.iter().map(move |&ev| (ex, ev)))
            .collect()
    }
}

/// Leader at constant speed followed by one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoVehicle {
    pub v_leader: f64,
    pub tau_leader: f64,
    pub tau_follower: f64,
    pub duration: f64,
    pub gains: GainsMode,
    pub derivative: DerivativeForm,
}

impl Default for TwoVehicle {
    fn default() -> Self {
        Self {
            v_leader: 30.0,
            tau_leader: 0.5,
            tau_follower: 0.7,
            duration: 60.0,
            gains: GainsMode::Group2,
            derivative: DerivativeForm::PerSecond,
        }
    }
}

/// Two-vehicle scenario with spacing error `ex` and speed error
/// `ev = v_leader - v_follower` at t = 0.
pub fn two_vehicle_spec(ex: f64, ev: f64, cfg: &TwoVehicle) -> ScenarioSpec {
    let policy = SpacingPolicy::default();
    let v_f = cfg.v_leader - ev;
    let gap = desired_spacing(&policy, v_f) + ex;
    let vehicle = |id, x, v, tau| VehicleSpec {
        id,
        x,
        y: 0.0,
        v,
        a: 0.0,
        tau,
        length: 5.0,
        wheelbase: 2.7,
    };
    ScenarioSpec {
        name: format!("two-vehicle ex={ex} ev={ev}"),
        ts: 0.02,
        duration: cfg.duration,
        policy,
        limits: Limits::default(),
        gains: cfg.gains,
        derivative: cfg.derivative,
        controller: ControllerKind::Cascade,
        overshoot: OvershootConvention::CrossingBased,
        steady: SteadyBand::default(),
        vehicles: vec![
            vehicle(1, gap + 5.0, cfg.v_leader, cfg.tau_leader),
            vehicle(2, 0.0, v_f, cfg.tau_follower),
        ],
        lane_change: None,
        disturbance: None,
        mpc: MpcConfig::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub ex: f64,
    pub ev: f64,
    pub converged: bool,
    pub eta_percent: f64,
    pub t_steady_s: Option<f64>,
    pub collision: bool,
}

/// One run per grid point, evaluated in parallel; rows come back in grid
/// order whatever the scheduling.
pub fn run_sweep_with<F>(grid: &Grid, make: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, f64) -> ScenarioSpec + Sync,
{
    grid.validate()?;
    grid.points()
        .par_iter()
        .map(|&(ex, ev)| {
            let out = run_scenario(&make(ex, ev), RunOptions { record: false })?;
            let m = out.metrics;
            Ok(SweepRow {
                ex,
                ev,
                converged: m.converged,
                eta_percent: m.eta,
                t_steady_s: m.t_steady,
                collision: m.collision.is_some(),
            })
        })
        .collect()
}

pub fn run_sweep(grid: &Grid, base: &TwoVehicle) -> Result<Vec<SweepRow>> {
    run_sweep_with(grid, |ex, ev| two_vehicle_spec(ex, ev, base))
}

/// One row of the published gain study: initial errors, gain ranges
/// `[lo, hi]` in the order kpx, kix, kdx, kpv, kiv, kdv, and the reported
/// overshoot (%) and settling time (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainStudyRow {
    pub scenario: u32,
    pub ev: f64,
    pub ex: f64,
    pub ranges: [[f64; 2]; 6],
    pub eta: f64,
    pub t_steady: f64,
}

const fn fixed(v: f64) -> [f64; 2] {
    [v, v]
}

#[allow(clippy::too_many_arguments)]
const fn row(
    scenario: u32,
    ev: f64,
    ex: f64,
    kpx: [f64; 2],
    kdx: [f64; 2],
    kpv: [f64; 2],
    eta: f64,
    t_steady: f64,
) -> GainStudyRow {
    GainStudyRow {
        scenario,
        ev,
        ex,
        ranges: [kpx, fixed(0.0), kdx, kpv, fixed(0.0), fixed(0.0)],
        eta,
        t_steady,
    }
}

pub const GAIN_STUDY: [GainStudyRow; 22] = [
    GainStudyRow {
        scenario: 1,
        ev: 0.0,
        ex: 0.0,
        ranges: [
            fixed(300.0),
            fixed(0.0),
            fixed(0.0),
            fixed(8.0),
            fixed(0.0),
            fixed(2.0),
        ],
        eta: 0.0,
        t_steady: 6.0,
    },
    row(2, 1.0, 0.0, fixed(10.0), [1.0, 5.0], [1.0, 30.0], 0.0, 4.0),
    row(3, 2.0, 0.0, fixed(10.0), [1.0, 3.0], [1.0, 30.0], 0.0, 4.0),
    row(4, 3.0, 0.0, fixed(10.0), [1.0, 3.0], [1.0, 30.0], 1.5, 5.0),
    row(5, 5.0, 0.0, [5.0, 15.0], [3.0, 5.0], [1.0, 10.0], 6.0, 8.0),
    row(
        6,
        7.0,
        0.0,
        [5.0, 15.0],
        [5.0, 10.0],
        [1.0, 10.0],
        8.0,
        10.0,
    ),
    row(
        7,
        10.0,
        0.0,
        [5.0, 15.0],
        [9.0, 10.0],
        [1.0, 8.0],
        13.3,
        15.0,
    ),
    row(
        8,
        0.0,
        -10.0,
        [8.0, 15.0],
        [8.0, 10.0],
        [1.0, 8.0],
        0.0,
        10.0,
    ),
    row(9, 0.0, -5.0, fixed(8.0), fixed(10.0), fixed(5.0), 0.0, 15.0),
    row(
        10,
        0.0,
        -2.0,
        fixed(8.0),
        fixed(10.0),
        fixed(5.0),
        0.0,
        15.0,
    ),
    row(11, 0.0, 1.0, fixed(8.0), fixed(10.0), fixed(5.0), 0.0, 15.0),
    row(12, 0.0, 3.0, fixed(8.0), fixed(10.0), fixed(5.0), 0.0, 15.0),
    row(13, 0.0, 7.0, fixed(8.0), fixed(10.0), fixed(5.0), 0.0, 15.0),
    row(
        14,
        0.0,
        10.0,
        [8.0, 15.0],
        [8.0, 10.0],
        [1.0, 8.0],
        0.0,
        16.0,
    ),
    row(
        15,
        5.0,
        5.0,
        fixed(10.0),
        fixed(15.0),
        fixed(2.0),
        12.0,
        15.0,
    ),
    row(
        16,
        -5.0,
        -5.0,
        fixed(2.0),
        fixed(5.0),
        fixed(2.0),
        4.0,
        10.0,
    ),
    row(
        17,
        -5.0,
        5.0,
        fixed(10.0),
        [5.0, 15.0],
        [1.0, 8.0],
        15.0,
        15.0,
    ),
    row(18, 5.0, 2.0, fixed(5.0), fixed(10.0), fixed(5.0), 4.0, 15.0),
    row(19, 5.0, -2.0, fixed(5.0), fixed(5.0), fixed(5.0), 1.2, 10.0),
    row(
        20,
        -5.0,
        2.0,
        fixed(5.0),
        fixed(10.0),
        fixed(5.0),
        6.0,
        15.0,
    ),
    row(
        21,
        -2.0,
        5.0,
        fixed(5.0),
        fixed(10.0),
        fixed(5.0),
        0.0,
        15.0,
    ),
    row(22, 2.0, 5.0, fixed(5.0), fixed(10.0), fixed(5.0), 6.8, 20.0),
];

/// Gains recommended for the closed-loop response plots, clamped into each
/// study row's ranges.
pub const RECOMMENDED_GAINS: CascadeGains = CascadeGains::new(5.0, 0.0, 10.0, 5.0, 0.0, 0.0);

impl GainStudyRow {
    pub fn gains(&self) -> CascadeGains {
        let r = RECOMMENDED_GAINS.as_array();
        let g: [f64; 6] = std::array::from_fn(|i| r[i].clamp(self.ranges[i][0], self.ranges[i][1]));
        CascadeGains::new(g[0], g[1], g[2], g[3], g[4], g[5])
    }

    pub fn spec(&self, base: &TwoVehicle) -> ScenarioSpec {
        let cfg = TwoVehicle {
            gains: GainsMode::Custom(self.gains()),
            ..*base
        };
        let mut s = two_vehicle_spec(self.ex, self.ev, &cfg);
        s.name = format!("gain-study-{}", self.scenario);
        s
    }
}
