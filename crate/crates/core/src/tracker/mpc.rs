//! Linear time-varying MPC over the kinematic model.
//!
//! The prediction state is the pose error `[x̃, ỹ, φ̃]` stacked with the
//! previous input error `ũ(k-1) = u(k-1) - u_r(k)`; the decision vector is
//! the input-error increments over the control horizon followed by one
//! slack that softens the absolute input bounds.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

use super::qp::{solve_qp, QpProblem};
use crate::dynamics::KinematicState;
use crate::error::{ensure, Error, Result};
use crate::lanechange::{ReferencePoint, TrajectoryPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub np: usize,
    pub nc: usize,
    /// Weights on the (x, y, φ) errors.
    pub q: [f64; 3],
    /// Weights on the (v, δ) increments.
    pub r: [f64; 2],
    pub rho: f64,
    pub du_min: [f64; 2],
    pub du_max: [f64; 2],
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            np: 60,
            nc: 30,
            q: [10.0, 100.0, 50.0],
            r: [0.1, 1.0],
            rho: 1000.0,
            du_min: [-0.5, -0.01],
            du_max: [0.5, 0.01],
            u_min: [0.0, -0.3],
            u_max: [40.0, 0.3],
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.nc >= 1 && self.np >= self.nc, || {
            format!(
                "horizons must satisfy np >= nc >= 1, got np={} nc={}",
                self.np, self.nc
            )
        })?;
        ensure(self.q.iter().chain(&self.r).all(|w| *w >= 0.0), || {
            "MPC weights must be non-negative".to_string()
        })?;
        ensure(self.rho > 0.0, || {
            format!("slack weight must be positive, got {}", self.rho)
        })?;
        for c in 0..2 {
            ensure(
                self.du_min[c] <= self.du_max[c] && self.u_min[c] <= self.u_max[c],
                || format!("MPC bounds of input {c} are not ordered"),
            )?;
        }
        Ok(())
    }
}

/// Discrete error dynamics `x̃(k+1) = A x̃(k) + B ũ(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
}

/// Right-hand side of the kinematic model for state `(x, y, φ)` and input
/// `(v, δ)`.
pub fn kinematic_rhs(state: [f64; 3], input: [f64; 2], wheelbase: f64) -> [f64; 3] {
    let [_, _, phi] = state;
    let [v, delta] = input;
    [v * phi.cos(), v * phi.sin(), v * delta.tan() / wheelbase]
}

pub fn linearize(r: &ReferencePoint, v_r: f64, wheelbase: f64, ts: f64) -> Result<ErrorModel> {
    if !(r.delta_fr.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "reference wheel angle {} rad has no finite tangent",
            r.delta_fr
        )));
    }
    let (sin, cos) = r.phi_r.sin_cos();
    let cd = r.delta_fr.cos();
    let a = Matrix3::new(
        1.0,
        0.0,
        -ts * v_r * sin, //
        0.0,
        1.0,
        ts * v_r * cos, //
        0.0,
        0.0,
        1.0,
    );
    let b = Matrix3x2::new(
        ts * cos,
        0.0, //
        ts * sin,
        0.0, //
        ts * r.delta_fr.tan() / wheelbase,
        ts * v_r / (wheelbase * cd * cd),
    );
    Ok(ErrorModel { a, b })
}

/// Reference inputs and models along the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    /// `np` models, one per prediction step.
    pub models: Vec<ErrorModel>,
    /// Reference inputs `(v_r, δ_r)` for steps `0..nc`.
    pub u_ref: Vec<[f64; 2]>,
}

/// Condensed QP for one tick. `x_err0` is the current pose error and
/// `u_prev` the input applied on the previous tick.
pub fn build_qp(
    horizon: &Horizon,
    x_err0: [f64; 3],
    u_prev: [f64; 2],
    cfg: &MpcConfig,
) -> Result<QpProblem> {
    cfg.validate()?;
    let (np, nc) = (cfg.np, cfg.nc);
    ensure(
        horizon.models.len() == np && horizon.u_ref.len() == nc,
        || {
            format!(
                "horizon has {} models and {} inputs, expected {np} and {nc}",
                horizon.models.len(),
                horizon.u_ref.len()
            )
        },
    )?;
    ensure(x_err0.iter().chain(&u_prev).all(|e| e.is_finite()), || {
        "initial error must be finite".to_string()
    })?;

    let nu = 2 * nc;
    let nz = nu + 1;
    let u_tilde0 = [
        u_prev[0] - horizon.u_ref[0][0],
        u_prev[1] - horizon.u_ref[0][1],
    ];

    // free response and the impulse-response rows of every predicted error
    let mut free = Vector3::from(x_err0);
    let mut theta_j = nalgebra::Matrix3xX::<f64>::zeros(nu);
    let mut theta = DMatrix::<f64>::zeros(3 * np, nu);
    let mut psi = DVector::<f64>::zeros(3 * np);
    let ut0 = nalgebra::Vector2::from(u_tilde0);
    for (k, m) in horizon.models.iter().enumerate() {
        // ũ(k) = ũ(-1) + Σ_{i ≤ min(k, nc-1)} Δũ(i)
        let mut next = m.a * &theta_j;
        for i in 0..=k.min(nc - 1) {
            let mut blk = next.fixed_view_mut::<3, 2>(0, 2 * i);
            blk += m.b;
        }
        theta_j = next;
        free = m.a * free + m.b * ut0;
        theta.rows_mut(3 * k, 3).copy_from(&theta_j);
        psi.rows_mut(3 * k, 3).copy_from(&free);
    }

    let qbar = DVector::from_iterator(3 * np, (0..3 * np).map(|i| cfg.q[i % 3]));
    let qtheta = DMatrix::from_fn(3 * np, nu, |r, c| qbar[r] * theta[(r, c)]);
    let mut h = DMatrix::<f64>::zeros(nz, nz);
    let mut hu = theta.transpose() * &qtheta;
    for i in 0..nu {
        hu[(i, i)] += cfg.r[i % 2];
    }
    // exact symmetry for the solver
    let hu = (&hu + hu.transpose()) * 0.5;
    h.view_mut((0, 0), (nu, nu)).copy_from(&hu);
    h[(nu, nu)] = cfg.rho;

    let mut f = DVector::<f64>::zeros(nz);
    let fu = qtheta.transpose() * &psi * 2.0;
    f.rows_mut(0, nu).copy_from(&fu);

    // increment bounds on the true input, shifted by the reference change
    let mut lb = DVector::<f64>::zeros(nz);
    let mut ub = DVector::<f64>::zeros(nz);
    for k in 0..nc {
        for c in 0..2 {
            let dr = if k == 0 {
                0.0
            } else {
                horizon.u_ref[k][c] - horizon.u_ref[k - 1][c]
            };
            lb[2 * k + c] = cfg.du_min[c] - dr;
            ub[2 * k + c] = cfg.du_max[c] - dr;
        }
    }
    lb[nu] = 0.0;
    ub[nu] = f64::INFINITY;

    // softened absolute bounds: u_min - ε ≤ u_r(k) + ũ(-1) + Σ Δũ ≤ u_max + ε
    let mut g = DMatrix::<f64>::zeros(2 * nu, nz);
    let mut h_ineq = DVector::<f64>::zeros(2 * nu);
    for k in 0..nc {
        for c in 0..2 {
            let base = horizon.u_ref[k][c] + u_tilde0[c];
            let up = 2 * (2 * k + c);
            for i in 0..=k {
                g[(up, 2 * i + c)] = 1.0;
                g[(up + 1, 2 * i + c)] = -1.0;
            }
            g[(up, nu)] = -1.0;
            g[(up + 1, nu)] = -1.0;
            h_ineq[up] = cfg.u_max[c] - base;
            h_ineq[up + 1] = base - cfg.u_min[c];
        }
    }

    Ok(QpProblem {
        h,
        f,
        lb,
        ub,
        g,
        h_ineq,
    })
}

/// Reference samples along the horizon, starting at the point with the
/// same longitudinal coordinate as the vehicle and advancing at `v_r`.
pub fn reference_horizon(
    plan: &TrajectoryPlan,
    x_start: f64,
    v_r: f64,
    wheelbase: f64,
    ts: f64,
    np: usize,
) -> Vec<ReferencePoint> {
    let mut out = Vec::with_capacity(np + 1);
    let mut x = x_start;
    for _ in 0..=np {
        let p = plan.point_extended(x, wheelbase);
        x += v_r * p.phi_r.cos() * ts;
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackCommand {
    pub v: f64,
    pub delta: f64,
    /// Applied increment `(Δv, Δδ)`.
    pub du: [f64; 2],
    pub slack: f64,
    /// The solver failed and the previous input is held.
    pub held: bool,
}

/// One receding-horizon step: build and solve the QP and apply only the
/// first increment. `refs` needs at least `np` points.
pub fn track_step(
    current: &KinematicState,
    refs: &[ReferencePoint],
    v_r: f64,
    u_prev: [f64; 2],
    wheelbase: f64,
    ts: f64,
    cfg: &MpcConfig,
) -> Result<TrackCommand> {
    ensure(refs.len() >= cfg.np, || {
        format!("need {} reference points, got {}", cfg.np, refs.len())
    })?;
    let models = refs[..cfg.np]
        .iter()
        .map(|r| linearize(r, v_r, wheelbase, ts))
        .collect::<Result<Vec<_>>>()?;
    let u_ref = refs[..cfg.nc].iter().map(|r| [v_r, r.delta_fr]).collect();
    let r0 = &refs[0];
    let x_err0 = [
        current.x - r0.x_r,
        current.y - r0.y_r,
        current.phi - r0.phi_r,
    ];
    let qp = build_qp(&Horizon { models, u_ref }, x_err0, u_prev, cfg)?;

    let hold = TrackCommand {
        v: u_prev[0],
        delta: u_prev[1],
        du: [0.0, 0.0],
        slack: 0.0,
        held: true,
    };
    let sol = match solve_qp(&qp) {
        Ok(s) => s,
        Err(Error::SolverFailure { .. }) | Err(Error::Infeasible) => return Ok(hold),
        Err(e) => return Err(e),
    };
    // ũ(0) = ũ(-1) + Δũ(0) and u_r(0) cancels, so Δu(0) = Δũ(0)
    let du = [sol.z[0], sol.z[1]];
    let v = (u_prev[0] + du[0]).clamp(cfg.u_min[0], cfg.u_max[0]);
    let delta = (u_prev[1] + du[1]).clamp(cfg.u_min[1], cfg.u_max[1]);
    Ok(TrackCommand {
        v,
        delta,
        du: [v - u_prev[0], delta - u_prev[1]],
        slack: sol.z[2 * cfg.nc],
        held: false,
    })
}
