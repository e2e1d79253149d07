//! Longitudinal and lateral control for connected-vehicle platoons.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: third-order longitudinal model with inertial lag and the
//!   planar kinematic model used while changing lanes.
//! * [`dcpid`]: the distributed cascade PID (outer loop on spacing, inner
//!   loop on velocity) plus the two published gain groups.
//! * [`stability`]: closed-form local / string stability margins.
//! * [`lanechange`]: ordering, trigger gate, sine-curve trajectory planning
//!   and comfort feasibility.
//! * [`tracker`]: linearised error model, condensed MPC and a dense
//!   active-set QP solver.
//! * [`sim`]: scenario runner, lane-change phase machine, metrics, sweeps
//!   and the single-loop PID comparison arm.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dcpid;
pub mod dynamics;
mod error;
pub mod lanechange;
pub mod report;
pub mod sim;
pub mod stability;
pub mod tracker;

pub use dcpid::{CascadeGains, CascadePid, ControllerState, DerivativeForm, SpacingPolicy};
pub use dynamics::{KinematicState, Limits, LongitudinalState, VehicleParams};
pub use error::{Error, Result};
pub use lanechange::{ReferencePoint, TrajectoryPlan};
pub use sim::{MetricsReport, ScenarioSpec};
pub use stability::{StabilityPartials, StabilityVerdict};
pub use tracker::{MpcConfig, QpProblem};
