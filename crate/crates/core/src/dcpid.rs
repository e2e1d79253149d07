//! Distributed cascade PID for one leader/follower subsystem.
//!
//! The outer loop turns the spacing error into a velocity-domain setpoint;
//! the inner loop compares that setpoint with the relative speed and emits
//! the desired acceleration of the follower.

use serde::{Deserialize, Serialize};

use crate::dynamics::Limits;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeGains {
    pub kpx: f64,
    pub kix: f64,
    pub kdx: f64,
    pub kpv: f64,
    pub kiv: f64,
    pub kdv: f64,
}

impl CascadeGains {
    /// Gains for small disturbances around the steady state.
    pub const GROUP_1: Self = Self::new(300.0, 0.0, 0.0, 8.0, 0.0, 2.0);
    /// Gains for large spacing and/or velocity errors.
    pub const GROUP_2: Self = Self::new(8.0, 0.0, 10.0, 5.0, 0.0, 0.0);

    pub const fn new(kpx: f64, kix: f64, kdx: f64, kpv: f64, kiv: f64, kdv: f64) -> Self {
        Self {
            kpx,
            kix,
            kdx,
            kpv,
            kiv,
            kdv,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.kpx, self.kix, self.kdx, self.kpv, self.kiv, self.kdv]
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.as_array().iter().all(|g| g.is_finite()), || {
            format!("gains must be finite: {self:?}")
        })?;
        ensure(self.kpx >= 0.0 && self.kpv >= 0.0, || {
            format!("proportional gains must be non-negative: {self:?}")
        })
    }
}

/// Constant time headway policy: `S = d0 + ht * v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingPolicy {
    /// Minimum safe distance (m).
    pub d0: f64,
    /// Time headway (s).
    pub ht: f64,
}

impl Default for SpacingPolicy {
    fn default() -> Self {
        Self { d0: 4.0, ht: 0.8 }
    }
}

impl SpacingPolicy {
    pub fn validate(&self) -> Result<()> {
        ensure(self.d0 > 0.0 && self.ht > 0.0, || {
            format!("d0 and ht must be positive: {self:?}")
        })
    }
}

pub fn desired_spacing(policy: &SpacingPolicy, v_follower: f64) -> f64 {
    policy.d0 + v_follower * policy.ht
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemMeasurement {
    /// Leader rear bumper to follower front bumper (m).
    pub d: f64,
    pub v_leader: f64,
    pub v_follower: f64,
}

impl SubsystemMeasurement {
    /// Relative speed `v_leader - v_follower`.
    pub fn relative_speed(&self) -> f64 {
        self.v_leader - self.v_follower
    }
}

pub fn spacing_error(m: &SubsystemMeasurement, policy: &SpacingPolicy) -> f64 {
    m.d - desired_spacing(policy, m.v_follower)
}

/// Accumulators of one subsystem. A state that is not yet `primed` takes the
/// current errors as the previous ones on its first step, so a freshly formed
/// subsystem gets no derivative kick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub sum_ex: f64,
    pub prev_ex: f64,
    pub sum_ev: f64,
    pub prev_ev: f64,
    pub primed: bool,
}

impl ControllerState {
    /// Fresh state for a newly formed subsystem.
    pub fn new() -> Self {
        Self::default()
    }

    /// All-zero history, i.e. `e(-1) = 0` in the backward differences.
    pub fn zeroed() -> Self {
        Self {
            primed: true,
            ..Self::default()
        }
    }
}

/// How the backward-difference and running-sum terms relate to time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeForm {
    /// Raw per-sample difference and sum.
    PerStep,
    /// Difference divided by and sum multiplied by the sample time, so the
    /// gains are continuous-time PID gains.
    #[default]
    PerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOutput {
    /// Clamped desired acceleration (m/s²).
    pub u: f64,
    pub u_raw: f64,
    /// Outer-loop output.
    pub outer: f64,
    /// Spacing error.
    pub ex: f64,
    /// Inner-loop error.
    pub ev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadePid {
    pub gains: CascadeGains,
    pub policy: SpacingPolicy,
    pub limits: Limits,
    pub derivative: DerivativeForm,
    pub ts: f64,
}

impl CascadePid {
    pub fn new(gains: CascadeGains, policy: SpacingPolicy, limits: Limits, ts: f64) -> Self {
        Self {
            gains,
            policy,
            limits,
            derivative: DerivativeForm::default(),
            ts,
        }
    }

    pub fn with_derivative(mut self, derivative: DerivativeForm) -> Self {
        self.derivative = derivative;
        self
    }

    pub fn step(&self, m: &SubsystemMeasurement, st: &mut ControllerState) -> CascadeOutput {
        let g = &self.gains;
        let (dscale, iscale) = match self.derivative {
            DerivativeForm::PerStep => (1.0, 1.0),
            DerivativeForm::PerSecond => (1.0 / self.ts, self.ts),
        };

        let ex = spacing_error(m, &self.policy);
        if !st.primed {
            st.prev_ex = ex;
        }
        st.sum_ex += ex;
        let outer = g.kpx * ex + g.kix * st.sum_ex * iscale + g.kdx * (ex - st.prev_ex) * dscale;
        st.prev_ex = ex;

        // e_v = outer - (v_leader - v_follower), sign kept as published
        let ev = outer - m.relative_speed();
        if !st.primed {
            st.prev_ev = ev;
            st.primed = true;
        }
        st.sum_ev += ev;
        let u_raw = g.kpv * ev + g.kiv * st.sum_ev * iscale + g.kdv * (ev - st.prev_ev) * dscale;
        st.prev_ev = ev;

        CascadeOutput {
            u: self.limits.clamp_u(u_raw),
            u_raw,
            outer,
            ex,
            ev,
        }
    }
}

/// One literal evaluation of the cascade law with per-sample differences.
pub fn control_step(
    m: &SubsystemMeasurement,
    gains: &CascadeGains,
    policy: &SpacingPolicy,
    st: &ControllerState,
    limits: &Limits,
) -> (f64, ControllerState) {
    let pid = CascadePid {
        gains: *gains,
        policy: *policy,
        limits: *limits,
        derivative: DerivativeForm::PerStep,
        ts: 1.0,
    };
    let mut next = *st;
    let out = pid.step(m, &mut next);
    (out.u, next)
}

/// Bounds on |ex| and |ev| under which a subsystem counts as only slightly
/// disturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainThresholds {
    pub ex: f64,
    pub ev: f64,
}

impl Default for GainThresholds {
    fn default() -> Self {
        Self { ex: 0.5, ev: 0.5 }
    }
}

pub fn select_gains(ex: f64, ev: f64, thresholds: &GainThresholds) -> CascadeGains {
    if ex.abs() <= thresholds.ex && ev.abs() <= thresholds.ev {
        CascadeGains::GROUP_1
    } else {
        CascadeGains::GROUP_2
    }
}
