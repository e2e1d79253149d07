//! Path tracking for the lane-changing vehicle.

mod mpc;
mod qp;

pub use mpc::{
    build_qp, kinematic_rhs, linearize, reference_horizon, track_step, ErrorModel, Horizon,
    MpcConfig, TrackCommand,
};
pub use qp::{solve_qp, solve_qp_with, QpProblem, QpSolution, SolverSettings};
