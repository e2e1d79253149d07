#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use platoon_core::QpProblem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random strictly convex QP with up to `max_n` variables and up to
/// `max_rows` general rows, feasible by construction.
pub fn random_qp(rng: &mut ChaCha8Rng, max_n: usize, max_rows: usize) -> QpProblem {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(0..=max_rows);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let mut lb = DVector::zeros(n);
    let mut ub = DVector::zeros(n);
    let mut inside = DVector::zeros(n);
    for i in 0..n {
        let lo = rng.random_range(-2.0..0.0);
        let hi = lo + rng.random_range(0.5..3.0);
        inside[i] = rng.random_range(lo..hi);
        lb[i] = if rng.random_bool(0.2) {
            f64::NEG_INFINITY
        } else {
            lo
        };
        ub[i] = if rng.random_bool(0.2) {
            f64::INFINITY
        } else {
            hi
        };
    }
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let gz = &g * &inside;
    let h_ineq = DVector::from_fn(m, |r, _| gz[r] + rng.random_range(0.0..1.0));
    QpProblem {
        h,
        f,
        lb,
        ub,
        g,
        h_ineq,
    }
}

fn objective(p: &QpProblem, z: &DVector<f64>) -> f64 {
    (z.transpose() * &p.h * z)[(0, 0)] + p.f.dot(z)
}

fn feasible(p: &QpProblem, z: &DVector<f64>, tol: f64) -> bool {
    let boxed = (0..z.len()).all(|i| z[i] >= p.lb[i] - tol && z[i] <= p.ub[i] + tol);
    let rows = &p.g * z;
    boxed && (0..rows.len()).all(|r| rows[r] <= p.h_ineq[r] + tol)
}

/// Global minimum of `zᵀHz + fᵀz` by solving the KKT system of every
/// combination of active bounds and active rows and keeping the best
/// feasible stationary point.
pub fn enumerate_qp(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.f.len();
    let m = p.h_ineq.len();
    let mut best: Option<(DVector<f64>, f64)> = None;
    // per variable: 0 free, 1 at lower, 2 at upper
    let combos = 3usize.pow(n as u32);
    for code in 0..combos {
        let mut states = vec![0u8; n];
        let mut c = code;
        let mut usable = true;
        for s in states.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        for (i, s) in states.iter().enumerate() {
            if (*s == 1 && !p.lb[i].is_finite()) || (*s == 2 && !p.ub[i].is_finite()) {
                usable = false;
            }
        }
        if !usable {
            continue;
        }
        for rows in 0..(1usize << m) {
            let fixed: Vec<usize> = (0..n).filter(|&i| states[i] != 0).collect();
            let active: Vec<usize> = (0..m).filter(|r| rows >> r & 1 == 1).collect();
            let k = fixed.len() + active.len();
            let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
            let mut rhs = DVector::<f64>::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&(&p.h * 2.0));
            rhs.rows_mut(0, n).copy_from(&(-&p.f));
            for (j, &i) in fixed.iter().enumerate() {
                kkt[(n + j, i)] = 1.0;
                kkt[(i, n + j)] = 1.0;
                rhs[n + j] = if states[i] == 1 { p.lb[i] } else { p.ub[i] };
            }
            for (j, &r) in active.iter().enumerate() {
                let row = n + fixed.len() + j;
                for i in 0..n {
                    kkt[(row, i)] = p.g[(r, i)];
                    kkt[(i, row)] = p.g[(r, i)];
                }
                rhs[row] = p.h_ineq[r];
            }
            let Some(sol) = kkt.clone().lu().solve(&rhs) else {
                continue;
            };
            if (&kkt * &sol - &rhs).amax() > 1e-8 {
                continue;
            }
            let z = sol.rows(0, n).into_owned();
            if !feasible(p, &z, 1e-9) {
                continue;
            }
            let obj = objective(p, &z);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((z, obj));
            }
        }
    }
    best
}

/// Closed-form sine-curve lane change, written out independently of the
/// planner: offset, slope and second derivative at `x`.
pub fn sine_curve(x0: f64, y0: f64, yd: f64, m: f64, x: f64) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let s = (x - x0) / m;
    let y = y0 + yd * (s - (2.0 * PI * s).sin() / (2.0 * PI));
    let dy = yd / m * (1.0 - (2.0 * PI * s).cos());
    let d2y = 2.0 * PI * yd / (m * m) * (2.0 * PI * s).sin();
    (y, dy, d2y)
}
