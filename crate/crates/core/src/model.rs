//! The physical N-pendulum: derived constants, kinetic matrix, potential,
//! periodic forcing, and the equation-of-motion residual.
//!
//! All operations are pure functions of immutable inputs and safe to call
//! concurrently.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Number of samples per period used when bounding the forcing sup-norm.
const SUP_SAMPLES: usize = 10_000;

/// Relative inflation applied to the sampled sup so the bound never
/// underestimates the true supremum of a smooth trigonometric polynomial.
const SUP_INFLATION: f64 = 1.001;

/// Masses, lengths, gravity and the derived chain coefficients.
///
/// `alpha[j]` is the total mass carried by joint `j` (partial sum of the
/// masses from link `j` outward) and `beta[j] = alpha[j] * l[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    n: usize,
    m: Vec<f64>,
    l: Vec<f64>,
    g: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

/// alpha[j] = sum of masses j..N, beta[j] = alpha[j] * l[j].
pub fn derive_coefficients(m: &[f64], l: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if m.is_empty() || m.len() != l.len() {
        return Err(Error::InvalidParameter(format!(
            "need equal, nonzero mass/length counts (got {} and {})",
            m.len(),
            l.len()
        )));
    }
    for (i, &mi) in m.iter().enumerate() {
        if !(mi > 0.0) || !mi.is_finite() {
            return Err(Error::InvalidParameter(format!("mass {} = {mi} not positive", i + 1)));
        }
    }
    for (i, &li) in l.iter().enumerate() {
        if !(li > 0.0) || !li.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "length {} = {li} not positive",
                i + 1
            )));
        }
    }
    let n = m.len();
    let mut alpha = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += m[j];
        alpha[j] = acc;
    }
    let beta = alpha.iter().zip(l).map(|(a, li)| a * li).collect();
    Ok((alpha, beta))
}

impl PendulumParams {
    pub fn new(m: Vec<f64>, l: Vec<f64>, g: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter(format!("gravity {g} not positive")));
        }
        let (alpha, beta) = derive_coefficients(&m, &l)?;
        Ok(Self { n: m.len(), m, l, g, alpha, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[f64] {
        &self.m
    }

    pub fn lengths(&self) -> &[f64] {
        &self.l
    }

    pub fn gravity(&self) -> f64 {
        self.g
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Gravity-scaled coefficient `g * beta[i]`. Every level constant in
    /// [`crate::bounds`] uses this uniformly so that `g = 1` reproduces the
    /// plain `beta` formulas.
    pub fn gravity_beta(&self, i: usize) -> f64 {
        self.g * self.beta[i]
    }

    pub fn gravity_beta_sum(&self) -> f64 {
        self.beta.iter().map(|b| self.g * b).sum()
    }

    /// Kinetic matrix `A(q)`: diagonal `alpha_i l_i^2`, off-diagonal
    /// `alpha_j l_i l_j cos(q_i - q_j)` for `i < j`. Symmetric positive
    /// definite for all configurations.
    pub fn kinetic_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        debug_assert_eq!(q.len(), n);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.alpha[i] * self.l[i] * self.l[i];
            for j in (i + 1)..n {
                let v = self.alpha[j] * self.l[i] * self.l[j] * (q[i] - q[j]).cos();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// Directional derivative of the kinetic matrix along `y`:
    /// entry `(i, j)`, `i < j`, is `-alpha_j l_i l_j sin(q_i - q_j)(y_i - y_j)`;
    /// the diagonal vanishes.
    pub fn kinetic_matrix_derivative(&self, q: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        debug_assert_eq!(q.len(), n);
        debug_assert_eq!(y.len(), n);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = -self.alpha[j] * self.l[i] * self.l[j]
                    * (q[i] - q[j]).sin()
                    * (y[i] - y[j]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// `V(q) = g * sum_j beta_j cos(q_j)`.
    pub fn potential(&self, q: &[f64]) -> f64 {
        self.g
            * q.iter()
                .zip(&self.beta)
                .map(|(qj, bj)| bj * qj.cos())
                .sum::<f64>()
    }

    /// Component `j` equals `-g beta_j sin(q_j)`.
    pub fn potential_gradient(&self, q: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            q.iter().zip(&self.beta).map(|(qj, bj)| -self.g * bj * qj.sin()),
        )
    }

    /// Covector `G_i = (1/2) d/dq_i [A(q) p . p]`, the configuration gradient
    /// of the kinetic form at fixed velocities.
    pub fn kinetic_config_gradient(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        let mut grad = DVector::zeros(self.n);
        self.kinetic_config_gradient_into(q, p, grad.as_mut_slice());
        grad
    }

    /// Allocation-free variants for the quadrature hot path.
    pub(crate) fn kinetic_matrix_into(&self, q: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i * n + i] = self.alpha[i] * self.l[i] * self.l[i];
            for j in (i + 1)..n {
                let v = self.alpha[j] * self.l[i] * self.l[j] * (q[i] - q[j]).cos();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
    }

    pub(crate) fn kinetic_config_gradient_into(&self, q: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.fill(0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let term =
                    -self.alpha[j] * self.l[i] * self.l[j] * (q[i] - q[j]).sin() * p[i] * p[j];
                out[i] += term;
                out[j] -= term;
            }
        }
    }

    pub(crate) fn potential_gradient_into(&self, q: &[f64], out: &mut [f64]) {
        for (o, (qj, bj)) in out.iter_mut().zip(q.iter().zip(&self.beta)) {
            *o = -self.g * bj * qj.sin();
        }
    }
}

/// One harmonic of a forcing component: `cos_amp cos(2 pi k t / T) +
/// sin_amp sin(2 pi k t / T)` with `k >= 1`, so the mean over a period is
/// zero by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// Zero-mean trigonometric-polynomial forcing with period `T`, one harmonic
/// list per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    period: f64,
    components: Vec<Vec<Harmonic>>,
    sup_bound: f64,
}

impl Forcing {
    pub fn new(period: f64, components: Vec<Vec<Harmonic>>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParameter(format!("period {period} not positive")));
        }
        for comp in &components {
            for h in comp {
                if h.k == 0 {
                    return Err(Error::InvalidParameter(
                        "forcing harmonic index must be >= 1 (zero mean)".into(),
                    ));
                }
            }
        }
        let mut f = Self { period, components, sup_bound: 0.0 };
        f.sup_bound = f.sample_sup();
        Ok(f)
    }

    pub fn zero(n: usize, period: f64) -> Self {
        Self { period, components: vec![Vec::new(); n], sup_bound: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn components(&self) -> &[Vec<Harmonic>] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|h| h.cos_amp == 0.0 && h.sin_amp == 0.0))
    }

    /// True when every harmonic is a pure sine, i.e. `f(-t) = -f(t)`.
    pub fn is_odd(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|h| h.cos_amp == 0.0))
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let w = TAU / self.period;
        DVector::from_iterator(
            self.n(),
            self.components.iter().map(|comp| {
                comp.iter()
                    .map(|h| {
                        let ph = w * h.k as f64 * t;
                        h.cos_amp * ph.cos() + h.sin_amp * ph.sin()
                    })
                    .sum::<f64>()
            }),
        )
    }

    fn sample_sup(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut sup: f64 = 0.0;
        for s in 0..SUP_SAMPLES {
            let t = self.period * s as f64 / SUP_SAMPLES as f64;
            sup = sup.max(self.eval(t).norm());
        }
        sup * SUP_INFLATION
    }

    /// Sup-norm bound `M0 >= sup_t |f(t)|`, from dense sampling with a small
    /// inflation so the sampled peak is never under-reported.
    pub fn bound(&self) -> f64 {
        self.sup_bound
    }

    /// Exact `L^2` norm over one period, `(T/2 sum (c^2 + s^2))^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self
            .components
            .iter()
            .flat_map(|c| c.iter())
            .map(|h| h.cos_amp * h.cos_amp + h.sin_amp * h.sin_amp)
            .sum();
        (self.period / 2.0 * sq).sqrt()
    }

    /// Per-coordinate `L^2` norm `||f_i||`.
    pub fn l2_norm_component(&self, i: usize) -> f64 {
        let sq: f64 = self.components[i]
            .iter()
            .map(|h| h.cos_amp * h.cos_amp + h.sin_amp * h.sin_amp)
            .sum();
        (self.period / 2.0 * sq).sqrt()
    }

    /// Dense amplitude tables up to harmonic `k_max` (inclusive, 1-indexed
    /// harmonics stored at `[i][k-1]`). Harmonics above `k_max` are dropped;
    /// they cannot couple to a loop truncated at `k_max`.
    pub fn dense_amplitudes(&self, k_max: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.n();
        let mut cos = vec![vec![0.0; k_max]; n];
        let mut sin = vec![vec![0.0; k_max]; n];
        for (i, comp) in self.components.iter().enumerate() {
            for h in comp {
                let k = h.k as usize;
                if k <= k_max {
                    cos[i][k - 1] += h.cos_amp;
                    sin[i][k - 1] += h.sin_amp;
                }
            }
        }
        (cos, sin)
    }
}

/// Equation-of-motion residual along a sampled trajectory:
/// `A(q) qdd + (dA/dt) qd - (1/2) grad_q (A qd . qd) - grad V(q) - f(t)`.
/// Vanishes exactly on solutions of the forced system.
pub fn euler_lagrange_residual(
    params: &PendulumParams,
    forcing: &Forcing,
    q: &[f64],
    qd: &[f64],
    qdd: &[f64],
    t: f64,
) -> DVector<f64> {
    let a = params.kinetic_matrix(q);
    let a_dot = params.kinetic_matrix_derivative(q, qd);
    let qd_v = DVector::from_column_slice(qd);
    let qdd_v = DVector::from_column_slice(qdd);
    let g = params.kinetic_config_gradient(q, qd);
    let grad_v = params.potential_gradient(q);
    a * qdd_v + a_dot * qd_v - g - grad_v - forcing.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(m: &[f64], l: &[f64], g: f64) -> PendulumParams {
        PendulumParams::new(m.to_vec(), l.to_vec(), g).unwrap()
    }

    #[test]
    fn derive_coefficients_examples() {
        let (a, b) = derive_coefficients(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(a, vec![2.0, 1.0]);
        assert_eq!(b, vec![2.0, 1.0]);

        let (a, b) = derive_coefficients(&[10.0, 1.0], &[0.1, 10.0]).unwrap();
        assert_eq!(a, vec![11.0, 1.0]);
        assert_relative_eq!(b[0], 1.1, max_relative = 1e-15);
        assert_relative_eq!(b[1], 10.0, max_relative = 1e-15);

        let (a, b) = derive_coefficients(&[1.0], &[1.0]).unwrap();
        assert_eq!((a, b), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn derive_coefficients_rejects_nonpositive() {
        assert!(derive_coefficients(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(derive_coefficients(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(derive_coefficients(&[], &[]).is_err());
        assert!(PendulumParams::new(vec![1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn kinetic_matrix_examples() {
        let p = params(&[1.0], &[1.0], 1.0);
        assert_eq!(p.kinetic_matrix(&[0.7])[(0, 0)], 1.0);

        let p = params(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        let a = p.kinetic_matrix(&[0.0, 0.0]);
        assert_eq!(a[(0, 0)], 2.0);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], 1.0);
        assert_eq!(a[(1, 1)], 1.0);

        let a = p.kinetic_matrix(&[0.0, PI / 2.0]);
        assert_abs_diff_eq!(a[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(1, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kinetic_matrix_positive_definite_on_grid() {
        // 12^N grid over the torus for N <= 3.
        for (m, l) in [
            (vec![1.0], vec![1.0]),
            (vec![10.0, 1.0], vec![0.1, 10.0]),
            (vec![1.0, 2.0, 0.5], vec![1.0, 0.3, 2.0]),
        ] {
            let n = m.len();
            let p = PendulumParams::new(m, l, 1.0).unwrap();
            let steps = 12usize;
            let total = steps.pow(n as u32);
            for idx in 0..total {
                let mut q = vec![0.0; n];
                let mut rem = idx;
                for qi in q.iter_mut() {
                    *qi = TAU * (rem % steps) as f64 / steps as f64;
                    rem /= steps;
                }
                let eig = p.kinetic_matrix(&q).symmetric_eigenvalues();
                assert!(eig.min() > 0.0, "A(q) not positive definite at {q:?}");
            }
        }
    }

    #[test]
    fn kinetic_matrix_shift_invariant() {
        let p = params(&[1.0, 2.0, 0.5], &[1.0, 0.3, 2.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let c: f64 = rng.random_range(-10.0..10.0);
            let shifted: Vec<f64> = q.iter().map(|qi| qi + c).collect();
            let a = p.kinetic_matrix(&q);
            let b = p.kinetic_matrix(&shifted);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn kinetic_matrix_derivative_examples() {
        let p = params(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        let zero = p.kinetic_matrix_derivative(&[0.3, 1.7], &[0.0, 0.0]);
        assert_eq!(zero, DMatrix::zeros(2, 2));

        let d = p.kinetic_matrix_derivative(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(d[(0, 1)], 0.0);

        let d = p.kinetic_matrix_derivative(&[PI / 2.0, 0.0], &[1.0, 0.0]);
        assert_relative_eq!(d[(0, 1)], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn kinetic_matrix_derivative_matches_finite_differences() {
        let p = params(&[1.0, 2.0, 0.5], &[1.0, 0.3, 2.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-PI..PI)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let qp: Vec<f64> = q.iter().zip(&y).map(|(qi, yi)| qi + h * yi).collect();
            let qm: Vec<f64> = q.iter().zip(&y).map(|(qi, yi)| qi - h * yi).collect();
            let fd = (p.kinetic_matrix(&qp) - p.kinetic_matrix(&qm)) / (2.0 * h);
            let an = p.kinetic_matrix_derivative(&q, &y);
            for i in 0..3 {
                for j in 0..3 {
                    let scale = 1.0 + an[(i, j)].abs();
                    assert!(
                        (fd[(i, j)] - an[(i, j)]).abs() / scale < 1e-6,
                        "entry ({i},{j}): fd {} vs analytic {}",
                        fd[(i, j)],
                        an[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn potential_examples() {
        let p = params(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        assert_relative_eq!(p.potential(&[0.0, 0.0]), 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.potential(&[PI, PI]), -3.0, max_relative = 1e-15);
        assert_abs_diff_eq!(p.potential(&[PI / 2.0, PI / 2.0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn potential_gradient_examples() {
        let p = params(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        assert_abs_diff_eq!(p.potential_gradient(&[0.0, 0.0]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.potential_gradient(&[PI, PI]).norm(), 0.0, epsilon = 1e-12);

        let p1 = params(&[1.0], &[1.0], 1.0);
        assert_relative_eq!(p1.potential_gradient(&[PI / 2.0])[0], -1.0, max_relative = 1e-15);
    }

    #[test]
    fn potential_is_periodic() {
        let p = params(&[1.0, 2.0], &[0.5, 3.0], 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q: Vec<f64> = (0..2).map(|_| rng.random_range(-PI..PI)).collect();
            let qs: Vec<f64> = q.iter().map(|qi| qi + TAU).collect();
            assert_relative_eq!(p.potential(&q), p.potential(&qs), max_relative = 1e-12);
            assert_relative_eq!(
                p.potential_gradient(&q),
                p.potential_gradient(&qs),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn forcing_eval_and_bound() {
        let f = Forcing::zero(2, 1.0);
        assert_eq!(f.eval(0.3).norm(), 0.0);
        assert_eq!(f.bound(), 0.0);
        assert!(f.is_zero());

        let eps = 0.25;
        let t_per = 2.0;
        let f = Forcing::new(
            t_per,
            vec![vec![Harmonic { k: 1, cos_amp: 0.0, sin_amp: eps }], vec![]],
        )
        .unwrap();
        let v = f.eval(t_per / 4.0);
        assert_relative_eq!(v[0], eps, max_relative = 1e-12);
        assert_eq!(v[1], 0.0);
        // M0 within 1% of the true sup (= eps), never below it.
        assert!(f.bound() >= eps);
        assert!(f.bound() <= eps * 1.01);
        assert!(f.is_odd());
        assert!(!f.is_zero());
    }

    #[test]
    fn forcing_rejects_constant_term() {
        assert!(Forcing::new(1.0, vec![vec![Harmonic { k: 0, cos_amp: 1.0, sin_amp: 0.0 }]])
            .is_err());
    }

    #[test]
    fn forcing_mean_is_zero() {
        let f = Forcing::new(
            1.5,
            vec![vec![
                Harmonic { k: 1, cos_amp: 0.3, sin_amp: -0.2 },
                Harmonic { k: 3, cos_amp: 0.05, sin_amp: 0.6 },
            ]],
        )
        .unwrap();
        let m = 4096;
        let mean: f64 = (0..m).map(|s| f.eval(1.5 * s as f64 / m as f64)[0]).sum::<f64>() / m as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_zero_at_equilibria() {
        // Both single-link equilibria, extended to N links at rest.
        for n in 1..=3usize {
            let p = params(&vec![1.0; n], &vec![1.0; n], 1.0);
            let f = Forcing::zero(n, 1.0);
            let zero = vec![0.0; n];
            for angle in [0.0, PI] {
                let q = vec![angle; n];
                let r = euler_lagrange_residual(&p, &f, &q, &zero, &zero, 0.0);
                assert!(r.norm() < 1e-8, "residual {} at rest angle {angle}", r.norm());
            }
        }
    }

    // Independent oracle: residual_i = d/dt [dL/dp_i] - dL/dq_i - f_i with both
    // partials taken by central differences of the scalar Lagrangian and the
    // time derivative by central differences along the trajectory.
    #[test]
    fn residual_matches_finite_difference_oracle() {
        let p = params(&[2.0, 1.0], &[1.0, 0.7], 1.3);
        let f = Forcing::new(
            2.0,
            vec![
                vec![Harmonic { k: 1, cos_amp: 0.1, sin_amp: 0.2 }],
                vec![Harmonic { k: 2, cos_amp: -0.3, sin_amp: 0.0 }],
            ],
        )
        .unwrap();

        let lagrangian = |q: &[f64], v: &[f64]| -> f64 {
            let a = p.kinetic_matrix(q);
            let vv = DVector::from_column_slice(v);
            0.5 * (&a * &vv).dot(&vv) + p.potential(q)
        };

        // A smooth test trajectory with its exact derivatives.
        let traj = |t: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let q = vec![0.4 * (1.3 * t).sin() + TAU * t / 2.0, 0.8 * (0.9 * t).cos()];
            let qd = vec![0.4 * 1.3 * (1.3 * t).cos() + TAU / 2.0, -0.8 * 0.9 * (0.9 * t).sin()];
            let qdd = vec![-0.4 * 1.3 * 1.3 * (1.3 * t).sin(), -0.8 * 0.9 * 0.9 * (0.9 * t).cos()];
            (q, qd, qdd)
        };

        let hq = 1e-5;
        let ht = 1e-3;
        let l_p = |t: f64, i: usize| -> f64 {
            let (q, qd, _) = traj(t);
            let mut vp = qd.clone();
            let mut vm = qd.clone();
            vp[i] += hq;
            vm[i] -= hq;
            (lagrangian(&q, &vp) - lagrangian(&q, &vm)) / (2.0 * hq)
        };

        let t0 = 0.37;
        let (q, qd, qdd) = traj(t0);
        let fval = f.eval(t0);
        let got = euler_lagrange_residual(&p, &f, &q, &qd, &qdd, t0);
        for i in 0..2 {
            // Fourth-order central stencil keeps the double-differencing
            // noise below the comparison tolerance.
            let dt_lp = (8.0 * (l_p(t0 + ht, i) - l_p(t0 - ht, i))
                - (l_p(t0 + 2.0 * ht, i) - l_p(t0 - 2.0 * ht, i)))
                / (12.0 * ht);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += hq;
            qm[i] -= hq;
            let l_q = (lagrangian(&qp, &qd) - lagrangian(&qm, &qd)) / (2.0 * hq);
            let want = dt_lp - l_q - fval[i];
            let scale = 1.0 + want.abs();
            assert!(
                (got[i] - want).abs() / scale < 1e-5,
                "component {i}: got {} want {}",
                got[i],
                want
            );
        }
    }

    #[test]
    fn kinetic_config_gradient_matches_potential_style_fd() {
        let p = params(&[2.0, 1.0, 0.5], &[1.0, 0.7, 1.2], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-PI..PI)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let vv = DVector::from_column_slice(&v);
            let quad = |q: &[f64]| 0.5 * (p.kinetic_matrix(q) * &vv).dot(&vv);
            let g = p.kinetic_config_gradient(&q, &v);
            for i in 0..3 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let fd = (quad(&qp) - quad(&qm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
            }
        }
    }
}
