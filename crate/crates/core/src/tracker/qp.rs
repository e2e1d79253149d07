//! Dense convex QP solver (dual active-set, Goldfarb–Idnani).
//!
//! Solves `min zᵀ H z + fᵀ z` subject to `lb ≤ z ≤ ub` and `G z ≤ h`.
//! The unconstrained minimiser is the starting point; the most violated
//! constraint is added each outer iteration while dual feasibility is kept,
//! so every iterate is optimal for the constraints currently active.
//! Matrices are small, so the projected quantities are recomputed from
//! scratch on each step instead of being updated.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric cost matrix, objective `zᵀ H z + fᵀ z`.
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    /// General inequality rows `g z ≤ h_ineq`; may have zero rows.
    pub g: DMatrix<f64>,
    pub h_ineq: DVector<f64>,
}

impl QpProblem {
    pub fn boxed(h: DMatrix<f64>, f: DVector<f64>, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        let n = f.len();
        Self {
            h,
            f,
            lb,
            ub,
            g: DMatrix::zeros(0, n),
            h_ineq: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    /// Largest violation of any constraint at `z` (0 when feasible).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            worst = worst.max(self.lb[i] - z[i]).max(z[i] - self.ub[i]);
        }
        if self.g.nrows() > 0 {
            let gz = &self.g * z;
            for r in 0..gz.len() {
                worst = worst.max(gz[r] - self.h_ineq[r]);
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let shapes_ok = self.h.shape() == (n, n)
            && self.lb.len() == n
            && self.ub.len() == n
            && self.g.ncols() == n
            && self.g.nrows() == self.h_ineq.len();
        if !shapes_ok {
            return Err(Error::InvalidArgument("inconsistent QP dimensions".into()));
        }
        if (0..n).any(|i| self.lb[i] > self.ub[i]) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Constraint violation accepted at termination.
    pub feasibility_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            feasibility_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Number of constraints active at the solution.
    pub active: usize,
}

/// One constraint in the form `nᵀ z ≥ b`.
struct Row {
    n: DVector<f64>,
    b: f64,
}

fn constraint_rows(p: &QpProblem) -> Vec<Row> {
    let n = p.dim();
    let unit = |i: usize, s: f64| {
        let mut v = DVector::zeros(n);
        v[i] = s;
        v
    };
    let mut rows = Vec::new();
    for i in 0..n {
        if p.lb[i].is_finite() {
            rows.push(Row {
                n: unit(i, 1.0),
                b: p.lb[i],
            });
        }
        if p.ub[i].is_finite() {
            rows.push(Row {
                n: unit(i, -1.0),
                b: -p.ub[i],
            });
        }
    }
    for r in 0..p.g.nrows() {
        if p.h_ineq[r].is_finite() {
            rows.push(Row {
                n: -p.g.row(r).transpose(),
                b: -p.h_ineq[r],
            });
        }
    }
    rows
}

/// Inverse of the Hessian `2H`, regularised if it is only semidefinite.
fn hessian_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let g = h * 2.0;
    let scale = g.diagonal().amax().max(1.0);
    for reg in [0.0, 1e-12, 1e-10, 1e-8] {
        let m = &g + DMatrix::identity(n, n) * (reg * scale);
        if let Some(c) = Cholesky::new(m) {
            return Ok(c.inverse());
        }
    }
    Err(Error::InvalidArgument(
        "QP Hessian is not positive semidefinite".into(),
    ))
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    solve_qp_with(p, &SolverSettings::default())
}

pub fn solve_qp_with(p: &QpProblem, settings: &SolverSettings) -> Result<QpSolution> {
    p.validate()?;
    let rows = constraint_rows(p);
    let ginv = hessian_inverse(&p.h)?;
    let mut z = -(&ginv * &p.f);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let tol = settings.feasibility_tol;

    let slack = |z: &DVector<f64>, r: &Row| r.n.dot(z) - r.b;
    let mut iterations = 0;

    loop {
        // most violated inactive constraint, lowest index on ties
        let mut pick: Option<(usize, f64)> = None;
        for (j, r) in rows.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            let s = slack(&z, r);
            let scaled = s / (1.0 + r.b.abs());
            if scaled < -tol && pick.is_none_or(|(_, best)| scaled < best) {
                pick = Some((j, scaled));
            }
        }
        let Some((pj, _)) = pick else {
            return Ok(QpSolution {
                objective: p.objective(&z),
                z,
                iterations,
                active: active.len(),
            });
        };

        let np = &rows[pj].n;
        let mut lambda_new = 0.0;
        loop {
            iterations += 1;
            if iterations > settings.max_iterations {
                return Err(Error::SolverFailure {
                    iterations,
                    best: z.iter().copied().collect(),
                });
            }
            let (step, r) = directions(&ginv, &rows, &active, np)?;

            // partial step: largest move keeping active multipliers ≥ 0
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let t = mult[k] / rk;
                    if t < t1 {
                        t1 = t;
                        drop = Some(k);
                    }
                }
            }
            let curvature = step.dot(np);
            let t2 = if step.amax() <= 1e-14 || curvature <= 1e-14 {
                f64::INFINITY
            } else {
                -slack(&z, &rows[pj]) / curvature
            };

            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible);
            }
            for (k, m) in mult.iter_mut().enumerate() {
                *m -= t * r[k];
            }
            lambda_new += t;
            if t2.is_finite() {
                z += &step * t;
            }
            if t2 <= t1 {
                active.push(pj);
                mult.push(lambda_new);
                break;
            }
            let k = drop.expect("finite partial step has a blocking constraint");
            active.remove(k);
            mult.remove(k);
        }
    }
}

/// Primal step direction and dual update for adding constraint `np`.
fn directions(
    ginv: &DMatrix<f64>,
    rows: &[Row],
    active: &[usize],
    np: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let gn = ginv * np;
    if active.is_empty() {
        return Ok((gn, DVector::zeros(0)));
    }
    let n = np.len();
    let q = active.len();
    let mut nmat = DMatrix::zeros(n, q);
    for (c, &j) in active.iter().enumerate() {
        nmat.set_column(c, &rows[j].n);
    }
    let gin = ginv * &nmat;
    let m = nmat.transpose() * &gin;
    let rhs = nmat.transpose() * &gn;
    let r = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("degenerate active set".into()))?;
    let step = gn - gin * &r;
    Ok((step, r))
}
