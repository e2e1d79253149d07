use std::collections::BTreeSet;

use platoon_core::sim::{
    compute_metrics, preset, run_scenario, single_pid_baseline, RunOptions, RunOutput, SeriesRow,
    PRESET_NAMES,
};
use platoon_core::ScenarioSpec;

fn run(spec: &ScenarioSpec) -> RunOutput {
    run_scenario(spec, RunOptions::default()).unwrap()
}

fn ticks(series: &[SeriesRow]) -> impl Iterator<Item = &[SeriesRow]> {
    series.chunk_by(|a, b| a.t == b.t)
}

#[test]
fn every_preset_is_collision_free_and_keeps_one_leader_per_follower() {
    for name in PRESET_NAMES {
        let spec = preset(name).unwrap();
        let out = run(&spec);
        assert!(
            out.metrics.collision.is_none(),
            "{name}: {:?}",
            out.metrics.collision
        );
        assert!(out.metrics.min_gap > 0.0, "{name}");
        assert!(out.metrics.eta >= 0.0);
        let ids: BTreeSet<u32> = spec.vehicles.iter().map(|v| v.id).collect();
        // vehicles without a subsystem: the head and a TFV on a speed script
        let mut expect_heads = vec![1];
        if let Some(lc) = spec
            .lane_change
            .as_ref()
            .filter(|lc| !lc.tfv_speed_profile.is_constant())
        {
            expect_heads.push(lc.tfv.unwrap());
        }
        let mut n_ticks = 0;
        for tick in ticks(&out.series) {
            n_ticks += 1;
            let seen: BTreeSet<u32> = tick.iter().map(|r| r.vehicle_id).collect();
            assert_eq!(seen, ids, "{name} at t={}", tick[0].t);
            assert_eq!(tick.len(), ids.len());
            let heads: Vec<u32> = tick
                .iter()
                .filter(|r| r.ex.is_none())
                .map(|r| r.vehicle_id)
                .collect();
            assert_eq!(heads, expect_heads, "{name} at t={}", tick[0].t);
        }
        assert_eq!(n_ticks, spec.steps(), "{name}");
    }
}

#[test]
fn time_column_advances_by_the_sample_time() {
    let spec = preset("fig11").unwrap();
    let out = run(&spec);
    let times: Vec<f64> = ticks(&out.series).map(|t| t[0].t).collect();
    for (k, t) in times.iter().enumerate() {
        assert!((t - k as f64 * spec.ts).abs() < 1e-9);
    }
}

#[test]
fn tracker_commands_respect_their_bounds() {
    for name in [
        "scenario1",
        "scenario2",
        "scenario3",
        "scenario4",
        "scenario5",
    ] {
        let spec = preset(name).unwrap();
        let cfg = spec.mpc;
        let out = run(&spec);
        assert!(!out.tracking.is_empty(), "{name}");
        for s in &out.tracking {
            assert!(!s.held, "{name}: solver failure at t={}", s.t);
            assert!(s.v >= cfg.u_min[0] && s.v <= cfg.u_max[0]);
            assert!(s.delta >= cfg.u_min[1] && s.delta <= cfg.u_max[1]);
            for c in 0..2 {
                assert!(
                    s.du[c] >= cfg.du_min[c] - 1e-9 && s.du[c] <= cfg.du_max[c] + 1e-9,
                    "{name}: du {:?} at t={}",
                    s.du,
                    s.t
                );
            }
        }
    }
}

#[test]
fn lane_change_moves_the_subject_vehicle_into_the_target_lane() {
    let spec = preset("scenario1").unwrap();
    let lc = spec.lane_change.clone().unwrap();
    let out = run(&spec);
    let last = out
        .series
        .iter()
        .rev()
        .find(|r| r.vehicle_id == lc.sv)
        .unwrap();
    assert!((last.y - lc.target_y).abs() <= 1e-3);
    let (t0, te) = (out.metrics.t0.unwrap(), out.metrics.te.unwrap());
    assert!(t0 > 0.0 && te > t0);
    // reference columns are filled only while the manoeuvre runs
    for r in out.series.iter().filter(|r| r.vehicle_id == lc.sv) {
        assert_eq!(r.ref_y.is_some(), r.t >= t0 && r.t < te, "t={}", r.t);
    }
}

#[test]
fn subject_vehicle_is_steered_smoothly() {
    let spec = preset("scenario1").unwrap();
    let out = run(&spec);
    let deltas: Vec<f64> = out.tracking.iter().map(|s| s.delta).collect();
    let peak = deltas.iter().map(|d| d.abs()).fold(0.0, f64::max);
    assert!(peak < 0.05, "peak wheel angle {peak}");
}

#[test]
fn fig9_attenuates_speed_errors_along_the_chain() {
    let out = run(&preset("fig9").unwrap());
    let peaks: Vec<f64> = out.metrics.vehicles.iter().map(|v| v.peak_abs_ev).collect();
    assert_eq!(peaks.len(), 7);
    for w in peaks.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "{peaks:?}");
    }
}

#[test]
fn spacing_errors_decay_under_both_controllers() {
    let spec = preset("fig11").unwrap();
    for out in [
        run(&spec),
        single_pid_baseline(&spec, RunOptions::default()).unwrap(),
    ] {
        assert!(out.metrics.converged);
        let last = ticks(&out.series).last().unwrap();
        assert!(last.iter().all(|r| r.ex.is_none_or(|e| e.abs() < 0.1)));
    }
}

#[test]
fn equilibrium_platoon_stays_put() {
    let mut spec = preset("fig12").unwrap();
    spec.disturbance = None;
    let out = run(&spec);
    assert_eq!(out.metrics.t_steady, Some(0.0));
    assert_eq!(out.metrics.eta, 0.0);
    assert!(out.metrics.peak_abs_ex < 1e-9 && out.metrics.peak_abs_ev < 1e-9);
}

#[test]
fn disturbed_leader_recovers_and_stays_in_band() {
    let spec = preset("fig12").unwrap();
    let out = run(&spec);
    let t_steady = out.metrics.t_steady.unwrap();
    assert!(t_steady > 8.0);
    for tick in ticks(&out.series).filter(|t| t[0].t >= t_steady) {
        assert!(tick
            .iter()
            .all(|r| r.ex.is_none_or(|e| e.abs() <= 0.1) && r.ev.is_none_or(|e| e.abs() <= 0.05)));
    }
}

#[test]
fn online_metrics_match_a_replay_of_the_series() {
    for name in ["fig9", "scenario3"] {
        let spec = preset(name).unwrap();
        let out = run(&spec);
        let v_ref = spec.vehicles[0].v;
        let replay = compute_metrics(&out.series, spec.steady, spec.overshoot, v_ref, spec.ts);
        assert_eq!(replay.t_steady, out.metrics.t_steady, "{name}");
        assert_eq!(replay.eta, out.metrics.eta, "{name}");
        assert_eq!(replay.vehicles, out.metrics.vehicles, "{name}");
        assert_eq!(
            replay.max_lateral_error, out.metrics.max_lateral_error,
            "{name}"
        );
    }
}

#[test]
fn recording_does_not_change_the_metrics() {
    let spec = preset("scenario4").unwrap();
    let a = run_scenario(&spec, RunOptions { record: true }).unwrap();
    let b = run_scenario(&spec, RunOptions { record: false }).unwrap();
    assert!(b.series.is_empty());
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn close_start_collides_and_is_reported() {
    let mut spec = preset("fig11").unwrap();
    // follower 2 starts 1 m behind the leader's tail at a much higher speed
    spec.vehicles[1].x = spec.vehicles[0].x - spec.vehicles[0].length - 1.0;
    spec.vehicles[1].v = 35.0;
    let out = run(&spec);
    let c = out.metrics.collision.expect("collision");
    assert_eq!((c.leader, c.follower), (1, 2));
    assert!(c.gap <= 0.0);
    assert!(out.metrics.min_gap <= 0.0);
}

#[test]
fn invalid_spec_is_rejected_before_running() {
    let mut spec = preset("fig9").unwrap();
    spec.vehicles[2].x = spec.vehicles[1].x;
    assert!(run_scenario(&spec, RunOptions::default()).is_err());
}
