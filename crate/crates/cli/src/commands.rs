use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use platoon_core::lanechange::{feasible_ap_domain, omega_upper_bound, ApGrid, REFERENCE_AP_TABLE};
use platoon_core::report::{fmt_sig, write_series, write_sweep};
use platoon_core::sim::{
    run_scenario, run_sweep, single_pid_baseline, GainsMode, Grid, RunOptions, TwoVehicle,
};
use platoon_core::stability::{check_stability, partials};
use platoon_core::{Error, MetricsReport, ScenarioSpec};
use serde::Serialize;

use crate::{scenario, Failure, FeasibleApArgs, StabilityArgs, SweepArgs};

fn core_failure(e: Error) -> Failure {
    Failure::invalid(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::output(format!("{}: {e}", path.display())))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::output(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::output(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn load(arg: &str, gains: Option<GainsMode>) -> Result<ScenarioSpec, Failure> {
    let mut spec = scenario::load(arg)?;
    if let Some(g) = gains {
        spec.gains = g;
    }
    Ok(spec)
}

fn collision_check(label: &str, m: &MetricsReport) -> Result<(), Failure> {
    match &m.collision {
        None => Ok(()),
        Some(c) => Err(Failure {
            code: Failure::COLLISION,
            message: format!(
                "{label}: vehicle {} hit vehicle {} at t = {} s (gap {} m)",
                c.follower,
                c.leader,
                fmt_sig(c.t),
                fmt_sig(c.gap)
            ),
        }),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.2}"))
}

pub fn run(arg: &str, out: &Path, gains: Option<GainsMode>) -> Result<(), Failure> {
    let spec = load(arg, gains)?;
    let result = run_scenario(&spec, RunOptions::default()).map_err(core_failure)?;
    out_dir(out)?;
    write_with(&out.join("series.csv"), |w| write_series(w, &result.series))?;
    write_json(&out.join("metrics.json"), &result.metrics)?;
    if !result.plans.is_empty() {
        write_with(&out.join("plans.csv"), |w| {
            writeln!(w, "t,m,x0,v_plan")?;
            for p in &result.plans {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_sig(p.t),
                    fmt_sig(p.m),
                    fmt_sig(p.x0),
                    fmt_sig(p.v_plan)
                )?;
            }
            Ok(())
        })?;
    }
    let manifest = toml::to_string(&spec).map_err(|e| Failure::output(format!("manifest: {e}")))?;
    write_with(&out.join("manifest.toml"), |w| {
        w.write_all(manifest.as_bytes())
    })?;

    let m = &result.metrics;
    println!(
        "{}: t_steady {} s, eta {:.3} %, min_gap {:.3} m, t0 {} s, te {} s",
        spec.name,
        opt(m.t_steady),
        m.eta,
        m.min_gap,
        opt(m.t0),
        opt(m.te)
    );
    collision_check(&spec.name, m)
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let grid = Grid {
        ex_min: a.ex_min,
        ex_max: a.ex_max,
        ex_step: a.ex_step,
        ev_min: a.ev_min,
        ev_max: a.ev_max,
        ev_step: a.ev_step,
    };
    grid.validate().map_err(core_failure)?;
    let base = TwoVehicle {
        v_leader: a.speed,
        gains: a.gains,
        ..TwoVehicle::default()
    };
    let rows = run_sweep(&grid, &base).map_err(core_failure)?;
    out_dir(&a.out)?;
    write_with(&a.out.join("sweep.csv"), |w| write_sweep(w, &rows))?;
    let converged = rows.iter().filter(|r| r.converged).count();
    let low = rows.iter().filter(|r| r.eta_percent < 5.0).count();
    println!(
        "{} grid points, {converged} converged, {low} with eta < 5 %",
        rows.len()
    );
    match rows.iter().find(|r| r.collision) {
        None => Ok(()),
        Some(r) => Err(Failure {
            code: Failure::COLLISION,
            message: format!(
                "collision at ex = {}, ev = {}",
                fmt_sig(r.ex),
                fmt_sig(r.ev)
            ),
        }),
    }
}

pub fn stability(a: &StabilityArgs) -> Result<(), Failure> {
    let gains = match a.gains {
        GainsMode::Auto => {
            return Err(Failure::invalid(
                "stability needs a fixed gain set, not auto",
            ))
        }
        g => g.gains(0.0, 0.0),
    };
    if !(a.ht > 0.0) {
        return Err(Failure::invalid(format!(
            "headway must be positive, got {}",
            a.ht
        )));
    }
    let p = partials(&gains, a.ht, a.ts, a.tau, a.t).map_err(core_failure)?;
    let v = check_stability(&p);
    // adding zero folds -0 into 0
    println!("f_v        {:.6}", p.f_v + 0.0);
    println!("f_ex_dot   {:.6}", p.f_ex_dot + 0.0);
    println!("f_d        {:.6}", p.f_d + 0.0);
    println!(
        "margin_local       {:.6} ({})",
        v.margin_local + 0.0,
        verdict(v.local)
    );
    println!(
        "margin_asymptotic  {:.6} ({})",
        v.margin_asymptotic + 0.0,
        verdict(v.asymptotic)
    );
    if v.stable() {
        Ok(())
    } else {
        Err(Failure {
            code: Failure::UNSTABLE,
            message: String::new(),
        })
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "stable"
    } else {
        "unstable"
    }
}

pub fn feasible_ap(a: &FeasibleApArgs) -> Result<(), Failure> {
    if !(a.speed > 0.0 && a.speed.is_finite()) {
        return Err(Failure::invalid(format!(
            "speed must be positive, got {}",
            a.speed
        )));
    }
    let grid = ApGrid {
        step: a.ap_step,
        max: a.ap_max,
    };
    let bound = feasible_ap_domain(a.speed, a.yd, &grid).map_err(core_failure)?;
    println!("omega_upper  {:.5} rad/s", omega_upper_bound(a.speed));
    match bound {
        Some(ap) => println!("a_p_max      {ap:.3} m/s^2"),
        None => println!("a_p_max      none on the grid"),
    }
    if let Some((_, omega, ap)) = REFERENCE_AP_TABLE.iter().find(|r| r.0 == a.speed) {
        println!("reference    omega {omega}, a_p {ap}");
    }
    Ok(())
}

#[derive(Serialize)]
struct Comparison<'a> {
    scenario: &'a str,
    cascade: &'a MetricsReport,
    single_pid: &'a MetricsReport,
}

pub fn compare(arg: &str, out: &Path, gains: Option<GainsMode>) -> Result<(), Failure> {
    let spec = load(arg, gains)?;
    let cascade = run_scenario(&spec, RunOptions::default()).map_err(core_failure)?;
    let single = single_pid_baseline(&spec, RunOptions::default()).map_err(core_failure)?;
    out_dir(out)?;
    write_with(&out.join("cascade.csv"), |w| {
        write_series(w, &cascade.series)
    })?;
    write_with(&out.join("single_pid.csv"), |w| {
        write_series(w, &single.series)
    })?;
    write_json(
        &out.join("comparison.json"),
        &Comparison {
            scenario: &spec.name,
            cascade: &cascade.metrics,
            single_pid: &single.metrics,
        },
    )?;
    println!(
        "{:<12}{:>12}{:>12}{:>12}",
        "controller", "peak |ex|", "peak |ev|", "t_steady"
    );
    for (label, m) in [
        ("cascade", &cascade.metrics),
        ("single-pid", &single.metrics),
    ] {
        println!(
            "{label:<12}{:>12.4}{:>12.4}{:>12}",
            m.peak_abs_ex,
            m.peak_abs_ev,
            opt(m.t_steady)
        );
    }
    collision_check("cascade", &cascade.metrics)?;
    collision_check("single-pid", &single.metrics)
}
