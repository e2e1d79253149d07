use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TWO: &str = r#"name = "two"
duration = 5.0

[[vehicles]]
id = 1
x = 40.0
y = 0.0
v = 20.0
tau = 0.5

[[vehicles]]
id = 2
x = 0.0
y = 0.0
v = 20.0
tau = 0.7
"#;

#[test]
fn run_writes_the_artifacts() {
    let dir = scratch("run_preset");
    let o = platoon(&[
        "run",
        "--scenario",
        "scenario1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,vehicle_id,x,y,phi,v,a,u,ex,ev,lane,phase,ref_x,ref_y,lat_err"
    );
    assert_eq!(csv.lines().count(), 1 + 5 * 2000);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    let t0 = metrics["t0"].as_f64().unwrap();
    assert!((t0 - 7.16).abs() <= 1.5, "t0 {t0}");
    assert!(metrics["collision"].is_null());
    assert!(dir.join("plans.csv").exists());
    assert!(dir.join("manifest.toml").exists());
}

#[test]
fn manifest_reproduces_the_run() {
    let a = scratch("manifest_a");
    let b = scratch("manifest_b");
    let o = platoon(&[
        "run",
        "--scenario",
        "scenario4",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = a.join("manifest.toml");
    let o = platoon(&[
        "run",
        "--scenario",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["series.csv", "metrics.json", "manifest.toml", "plans.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn extreme_preset_runs_without_collision() {
    let dir = scratch("fig9");
    let o = platoon(&["run", "--scenario", "fig9", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["min_gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn overlapping_vehicles_are_rejected_with_a_line() {
    let dir = scratch("overlap");
    let file = dir.join("bad.toml");
    fs::write(&file, TWO.replace("x = 0.0", "x = 40.0")).unwrap();
    let o = platoon(&[
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:13: vehicles[1].x:"), "{err}");
    assert!(!dir.join("series.csv").exists());
}

#[test]
fn syntax_error_is_line_anchored() {
    let dir = scratch("syntax");
    let file = dir.join("bad.toml");
    fs::write(
        &file,
        TWO.replace("v = 20.0\ntau = 0.7", "v = twenty\ntau = 0.7"),
    )
    .unwrap();
    let o = platoon(&[
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bad.toml:15:"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_is_invalid_input() {
    let o = platoon(&[
        "run",
        "--scenario",
        "no-such-thing",
        "--out",
        "/nonexistent",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn collision_exits_with_two() {
    let dir = scratch("collision");
    let file = dir.join("crash.toml");
    let src = TWO.replace("x = 0.0\ny = 0.0\nv = 20.0", "x = 34.0\ny = 0.0\nv = 35.0");
    fs::write(&file, src).unwrap();
    let o = platoon(&[
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(dir.join("series.csv").exists());
}

#[test]
fn gains_can_be_overridden() {
    let dir = scratch("gains");
    let file = dir.join("two.toml");
    fs::write(&file, TWO).unwrap();
    let out = dir.to_str().unwrap();
    let o = platoon(&[
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--out",
        out,
        "--gains",
        "300,0,0,8,0,2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("kpx = 300.0"), "{manifest}");
    let o = platoon(&["run", "--scenario", "fig9", "--out", out, "--gains", "1,2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn single_point_sweep() {
    let dir = scratch("sweep1");
    let o = platoon(&[
        "sweep",
        "--out",
        dir.to_str().unwrap(),
        "--ex-min",
        "0",
        "--ex-max",
        "0",
        "--ex-step",
        "1",
        "--ev-min",
        "0",
        "--ev-max",
        "0",
        "--ev-step",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(
        csv,
        "ex,ev,converged,eta_percent,t_steady_s\n0,0,true,0,0\n"
    );
}

#[test]
fn three_by_three_sweep() {
    let dir = scratch("sweep9");
    let o = platoon(&[
        "sweep",
        "--out",
        dir.to_str().unwrap(),
        "--ex-min",
        "-2",
        "--ex-max",
        "2",
        "--ex-step",
        "2",
        "--ev-min",
        "-1",
        "--ev-max",
        "1",
        "--ev-step",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("true")));
}

#[test]
fn default_sweep_converges_everywhere() {
    let dir = scratch("sweep_default");
    let o = platoon(&["sweep", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 441);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("true")));
    assert!(stdout(&o).starts_with("441 grid points"));
}

#[test]
fn reversed_sweep_range_is_invalid() {
    let o = platoon(&[
        "sweep",
        "--out",
        "/nonexistent",
        "--ex-min",
        "3",
        "--ex-max",
        "-3",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn stability_verdicts() {
    let o = platoon(&["stability", "--gains", "group2", "--tau", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("-0.771429") && text.contains("0.058776"),
        "{text}"
    );
    assert_eq!(
        platoon(&["stability", "--gains", "0,0,0,0,0,0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(platoon(&["stability", "--tau", "0"]).status.code(), Some(3));
    assert_eq!(
        platoon(&["stability", "--tau", "-0.5"]).status.code(),
        Some(3)
    );
}

#[test]
fn feasible_ap_reports_the_bounds() {
    for (speed, omega) in [("20", "0.02125"), ("25", "0.01700"), ("30", "0.01417")] {
        let o = platoon(&["feasible-ap", "--speed", speed]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains(omega), "{text}");
        assert!(text.contains("reference"), "{text}");
    }
    let o = platoon(&["feasible-ap", "--speed", "22"]);
    assert!(!stdout(&o).contains("reference"));
    assert_eq!(
        platoon(&["feasible-ap", "--speed", "0"]).status.code(),
        Some(3)
    );
    assert_eq!(
        platoon(&["feasible-ap", "--speed", "-5"]).status.code(),
        Some(3)
    );
}

#[test]
fn compare_writes_both_arms() {
    let dir = scratch("compare");
    let o = platoon(&[
        "compare",
        "--scenario",
        "fig12",
        "--out",
        dir.to_str().unwrap(),
        "--seedless",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("comparison.json")).unwrap()).unwrap();
    let peak = |arm: &str, k: &str| v[arm][k].as_f64().unwrap();
    assert!(peak("cascade", "peak_abs_ex") < peak("single_pid", "peak_abs_ex"));
    assert!(peak("cascade", "peak_abs_ev") < peak("single_pid", "peak_abs_ev"));
    assert!(dir.join("cascade.csv").exists() && dir.join("single_pid.csv").exists());
}

#[test]
fn usage_errors_are_invalid_input() {
    assert_eq!(platoon(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(platoon(&["run"]).status.code(), Some(3));
    assert_eq!(platoon(&["--help"]).status.code(), Some(0));
}
