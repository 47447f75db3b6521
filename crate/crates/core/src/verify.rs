//! Independent certification: integrate the equations of motion from a
//! candidate's initial conditions with a fixed-step fourth-order scheme and
//! check the winding periodicity, plus the pointwise residual of the
//! variational loop.

use crate::error::Result;
use crate::loopspace::LoopPath;
use crate::model::{euler_lagrange_residual, Forcing, PendulumParams};
use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Solve `A(q) qdd = (1/2) d_q (A qd . qd) + grad V + f(t) - (dA/dt) qd`
/// for the acceleration. `A` is symmetric positive definite for valid
/// parameters, so the Cholesky solve cannot fail.
pub fn acceleration(
    params: &PendulumParams,
    forcing: &Forcing,
    q: &[f64],
    qd: &[f64],
    t: f64,
) -> DVector<f64> {
    let a = params.kinetic_matrix(q);
    let a_dot = params.kinetic_matrix_derivative(q, qd);
    let qd_v = DVector::from_column_slice(qd);
    let rhs = params.kinetic_config_gradient(q, qd) + params.potential_gradient(q)
        + forcing.eval(t)
        - a_dot * qd_v;
    Cholesky::new(a)
        .expect("kinetic matrix is positive definite")
        .solve(&rhs)
}

/// A sampled trajectory of the second-order system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (&DVector<f64>, &DVector<f64>) {
        (self.positions.last().unwrap(), self.velocities.last().unwrap())
    }
}

/// Classic fourth-order one-step integration over `[t0, t0 + span]` with
/// `steps` uniform steps, sampling every accepted state.
pub fn integrate(
    params: &PendulumParams,
    forcing: &Forcing,
    q0: &[f64],
    qd0: &[f64],
    t0: f64,
    span: f64,
    steps: usize,
) -> Trajectory {
    debug_assert!(steps >= 1);
    let h = span / steps as f64;
    let mut q = DVector::from_column_slice(q0);
    let mut qd = DVector::from_column_slice(qd0);
    let mut out = Trajectory {
        times: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
    };
    out.times.push(t0);
    out.positions.push(q.clone());
    out.velocities.push(qd.clone());
    let accel = |q: &DVector<f64>, qd: &DVector<f64>, t: f64| {
        acceleration(params, forcing, q.as_slice(), qd.as_slice(), t)
    };
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1q = qd.clone();
        let k1v = accel(&q, &qd, t);
        let q2 = &q + &k1q * (h / 2.0);
        let v2 = &qd + &k1v * (h / 2.0);
        let k2q = v2.clone();
        let k2v = accel(&q2, &v2, t + h / 2.0);
        let q3 = &q + &k2q * (h / 2.0);
        let v3 = &qd + &k2v * (h / 2.0);
        let k3q = v3.clone();
        let k3v = accel(&q3, &v3, t + h / 2.0);
        let q4 = &q + &k3q * h;
        let v4 = &qd + &k3v * h;
        let k4q = v4.clone();
        let k4v = accel(&q4, &v4, t + h);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        qd += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        out.times.push(t0 + (s + 1) as f64 * h);
        out.positions.push(q.clone());
        out.velocities.push(qd.clone());
    }
    out
}

/// Conserved energy of the unforced system, `(1/2) qd . A(q) qd - V(q)`
/// (the potential enters the Lagrangian with a plus sign).
pub fn energy(params: &PendulumParams, q: &[f64], qd: &[f64]) -> f64 {
    let a = params.kinetic_matrix(q);
    let qd_v = DVector::from_column_slice(qd);
    0.5 * (a * &qd_v).dot(&qd_v) - params.potential(q)
}

/// Outcome of certifying one candidate loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    /// `|q(T) - q(0) - 2 pi v| + |qd(T) - qd(0)|`.
    pub defect: f64,
    pub defect_position: f64,
    pub defect_velocity: f64,
    /// Max Euclidean norm of the equation residual of the variational loop
    /// on the quadrature grid.
    pub max_residual: f64,
    /// Sup-norm gap between the variational loop and the integrated
    /// trajectory.
    pub sup_gap: f64,
    pub defect_threshold: f64,
    pub residual_threshold: f64,
    pub pass: bool,
    pub steps: usize,
}

/// Integrate from the loop's initial conditions over one period and measure
/// the periodicity defect and the loop's pointwise residual.
pub fn certify(
    params: &PendulumParams,
    forcing: &Forcing,
    lp: &LoopPath,
    steps: usize,
) -> Result<Certification> {
    let period = lp.period();
    let (q0, qd0) = lp.eval(0.0);
    let traj = integrate(params, forcing, q0.as_slice(), qd0.as_slice(), 0.0, period, steps);
    let (q_end, qd_end) = traj.last();
    let winding_gain = DVector::from_iterator(
        lp.n(),
        lp.winding().components().iter().map(|&v| TAU * v as f64),
    );
    let defect_position = (q_end - &q0 - &winding_gain).norm();
    let defect_velocity = (qd_end - &qd0).norm();
    let defect = defect_position + defect_velocity;

    // Residual of the variational loop on its quadrature grid.
    let grid_m = (8 * lp.k_trunc()).max(64);
    let mut max_residual: f64 = 0.0;
    for m in 0..grid_m {
        let t = period * m as f64 / grid_m as f64;
        let (q, qd) = lp.eval(t);
        let qdd = lp.eval_accel(t);
        let r = euler_lagrange_residual(
            params,
            forcing,
            q.as_slice(),
            qd.as_slice(),
            qdd.as_slice(),
            t,
        );
        max_residual = max_residual.max(r.norm());
    }

    // Pointwise gap between the loop and the integrated trajectory.
    let mut sup_gap: f64 = 0.0;
    for (idx, t) in traj.times.iter().enumerate() {
        let (q, _) = lp.eval(*t);
        sup_gap = sup_gap.max((&traj.positions[idx] - q).amax());
    }

    let defect_threshold = 1e-5 * (1.0 + winding_gain.norm());
    let residual_threshold =
        1e-4 * (1.0 + forcing.bound() + params.gravity_beta_sum());
    let pass = defect < defect_threshold && max_residual < residual_threshold;
    Ok(Certification {
        defect,
        defect_position,
        defect_velocity,
        max_residual,
        sup_gap,
        defect_threshold,
        residual_threshold,
        pass,
        steps,
    })
}
