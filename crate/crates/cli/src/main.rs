//! `platoon`: run scenarios, sweeps and the analytic checks from the shell.
//!
//! Exit codes: 0 success, 1 unstable gains, 2 collision, 3 invalid input,
//! 4 output could not be written.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use platoon_core::sim::GainsMode;
use platoon_core::CascadeGains;

#[derive(Debug, Parser)]
#[command(
    name = "platoon",
    version,
    about = "Cascade-PID platoon and lane-change simulator"
)]
struct Cli {
    /// Accepted for scripts; every command is deterministic.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write series.csv, metrics.json and manifest.toml.
    Run(RunArgs),
    /// Two-vehicle sweep over initial spacing and speed errors.
    Sweep(SweepArgs),
    /// Local and string stability margins of a gain set.
    Stability(StabilityArgs),
    /// Comfortable lateral-acceleration parameter at a given speed.
    FeasibleAp(FeasibleApArgs),
    /// Cascade PID against the single-loop PID baseline on one scenario.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file or preset name.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's gains: auto, group1, group2 or six comma-separated values.
    #[arg(long, value_parser = parse_gains)]
    gains: Option<GainsMode>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    ex_min: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    ex_max: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    ex_step: f64,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    ev_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    ev_max: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    ev_step: f64,
    /// Leader speed (m/s).
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    speed: f64,
    #[arg(long, value_parser = parse_gains, default_value = "group2")]
    gains: GainsMode,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[arg(long, value_parser = parse_gains, default_value = "group2")]
    gains: GainsMode,
    /// Inertial lag (s).
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    tau: f64,
    /// Time headway (s).
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    ht: f64,
    /// Sample time (s).
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    ts: f64,
    /// Time at which the integral terms are evaluated (s).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t: f64,
}

#[derive(Debug, Args)]
struct FeasibleApArgs {
    /// Vehicle speed (m/s).
    #[arg(long, allow_negative_numbers = true)]
    speed: f64,
    /// Lateral offset of the manoeuvre (m).
    #[arg(long, default_value_t = platoon_core::sim::LANE_WIDTH, allow_negative_numbers = true)]
    yd: f64,
    #[arg(long, default_value_t = 0.001)]
    ap_step: f64,
    #[arg(long, default_value_t = 1.0)]
    ap_max: f64,
}

fn parse_gains(s: &str) -> Result<GainsMode, String> {
    match s {
        "auto" => Ok(GainsMode::Auto),
        "group1" => Ok(GainsMode::Group1),
        "group2" => Ok(GainsMode::Group2),
        _ => {
            let v: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad gain list {s:?}: {e}"))?;
            let [kpx, kix, kdx, kpv, kiv, kdv] = v[..] else {
                return Err(format!(
                    "expected six gains kpx,kix,kdx,kpv,kiv,kdv, got {}",
                    v.len()
                ));
            };
            let g = CascadeGains::new(kpx, kix, kdx, kpv, kiv, kdv);
            g.validate().map_err(|e| e.to_string())?;
            Ok(GainsMode::Custom(g))
        }
    }
}

/// A command that did not succeed, with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const UNSTABLE: u8 = 1;
    pub const COLLISION: u8 = 2;
    pub const INVALID: u8 = 3;
    pub const OUTPUT: u8 = 4;

    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: Self::INVALID,
            message: message.into(),
        }
    }

    pub fn output(message: impl Into<String>) -> Self {
        Self {
            code: Self::OUTPUT,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Failure::INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => commands::run(&a.scenario, &a.out, a.gains),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Stability(a) => commands::stability(&a),
        Command::FeasibleAp(a) => commands::feasible_ap(&a),
        Command::Compare(a) => commands::compare(&a.scenario, &a.out, a.gains),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("{}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
