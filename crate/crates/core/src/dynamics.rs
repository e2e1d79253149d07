//! Discrete-time vehicle motion models.
//!
//! Longitudinal motion uses a first-order lag between the commanded and the
//! realised acceleration. Integration is semi-implicit: the acceleration is
//! updated first, the velocity uses the new acceleration and the position
//! uses the new velocity.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LongitudinalState {
    /// Position (m).
    pub x: f64,
    /// Velocity (m/s).
    pub v: f64,
    /// Acceleration (m/s²).
    pub a: f64,
}

impl LongitudinalState {
    pub const fn new(x: f64, v: f64, a: f64) -> Self {
        Self { x, v, a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Inertial lag of the longitudinal dynamics (s).
    pub tau: f64,
    /// Bumper-to-bumper length (m).
    pub length: f64,
    /// Front-to-rear axle distance (m).
    pub wheelbase: f64,
}

impl VehicleParams {
    pub fn new(tau: f64, length: f64, wheelbase: f64) -> Result<Self> {
        let p = Self {
            tau,
            length,
            wheelbase,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.tau > 0.0 && self.tau.is_finite(), || {
            format!("tau must be positive, got {}", self.tau)
        })?;
        ensure(self.length > 0.0 && self.length.is_finite(), || {
            format!("length must be positive, got {}", self.length)
        })?;
        ensure(self.wheelbase > 0.0 && self.wheelbase.is_finite(), || {
            format!("wheelbase must be positive, got {}", self.wheelbase)
        })
    }

    /// The lag recursion only stays a convex blend when `ts < tau`.
    pub fn validate_for(&self, ts: f64) -> Result<()> {
        self.validate()?;
        ensure(ts > 0.0 && ts.is_finite(), || {
            format!("sample time must be positive, got {ts}")
        })?;
        ensure(self.tau > ts, || {
            format!("tau ({}) must exceed the sample time ({ts})", self.tau)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub u_min: f64,
    pub u_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("u", self.u_min, self.u_max),
            ("a", self.a_min, self.a_max),
            ("v", self.v_min, self.v_max),
        ] {
            ensure(lo < hi, || {
                format!("{name}_min ({lo}) must be below {name}_max ({hi})")
            })?;
        }
        Ok(())
    }

    pub fn clamp_u(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }
}

impl Default for Limits {
    /// ±3 m/s² on command and acceleration, 0–40 m/s on velocity.
    fn default() -> Self {
        Self {
            u_min: -3.0,
            u_max: 3.0,
            a_min: -3.0,
            a_max: 3.0,
            v_min: 0.0,
            v_max: 40.0,
        }
    }
}

/// Advance the longitudinal model by one sample.
///
/// The command is clamped before entering the lag, then the acceleration and
/// the velocity are clamped in turn.
pub fn step_longitudinal(
    s: LongitudinalState,
    u: f64,
    params: &VehicleParams,
    limits: &Limits,
    ts: f64,
) -> Result<LongitudinalState> {
    params.validate_for(ts)?;
    Ok(step_longitudinal_unchecked(s, u, params.tau, limits, ts))
}

/// [`step_longitudinal`] without argument validation, for inner loops whose
/// parameters were validated up front.
#[inline]
pub fn step_longitudinal_unchecked(
    s: LongitudinalState,
    u: f64,
    tau: f64,
    limits: &Limits,
    ts: f64,
) -> LongitudinalState {
    let u = limits.clamp_u(u);
    let r = ts / tau;
    let a = ((1.0 - r) * s.a + r * u).clamp(limits.a_min, limits.a_max);
    let v = (s.v + a * ts).clamp(limits.v_min, limits.v_max);
    let x = s.x + v * ts;
    LongitudinalState { x, v, a }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicState {
    /// Rear-axle centre (m).
    pub x: f64,
    pub y: f64,
    /// Yaw angle (rad).
    pub phi: f64,
    /// Speed (m/s).
    pub v: f64,
    /// Front wheel angle (rad).
    pub delta_f: f64,
}

/// Forward-Euler step of the three-degree-of-freedom kinematic model.
pub fn step_kinematic(
    s: KinematicState,
    v: f64,
    delta_f: f64,
    wheelbase: f64,
    ts: f64,
) -> Result<KinematicState> {
    if !(delta_f.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "front wheel angle {delta_f} rad has no finite tangent"
        )));
    }
    ensure(ts > 0.0, || {
        format!("sample time must be positive, got {ts}")
    })?;
    ensure(wheelbase > 0.0, || {
        format!("wheelbase must be positive, got {wheelbase}")
    })?;
    let (sin, cos) = s.phi.sin_cos();
    Ok(KinematicState {
        x: s.x + v * cos * ts,
        y: s.y + v * sin * ts,
        phi: s.phi + v * delta_f.tan() / wheelbase * ts,
        v,
        delta_f,
    })
}
