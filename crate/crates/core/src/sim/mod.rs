//! Fixed-step platoon simulation.
//!
//! Each tick measures every subsystem, runs the lane-change phase machine,
//! computes all commands and only then advances the vehicles, so the order
//! of vehicles never affects the result.

mod engine;
mod metrics;
mod presets;
mod spec;
mod sweep;

pub use engine::{
    run_scenario, single_pid_baseline, Phase, PlanSample, RunOptions, RunOutput, SeriesRow,
    TrackSample, COMPLETION_TOL, SCRIPT_GAIN,
};
pub use metrics::{
    compute_metrics, Collision, MetricsAccumulator, MetricsReport, Sample, VehicleSummary,
};
pub use presets::{preset, LANE_CHANGE_AP, LANE_WIDTH, LEADER_TAU, PRESET_NAMES};
pub use spec::{
    ControllerKind, Disturbance, GainsMode, Issue, LaneChangeSpec, OvershootConvention,
    ScenarioSpec, Section, SinglePidGains, SpeedProfile, SteadyBand, VehicleSpec,
};
pub use sweep::{
    run_sweep, run_sweep_with, two_vehicle_spec, GainStudyRow, Grid, SweepRow, TwoVehicle,
    GAIN_STUDY, RECOMMENDED_GAINS,
};
