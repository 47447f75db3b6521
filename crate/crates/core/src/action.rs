//! The action functional over discretized loops, split into kinetic,
//! potential and forcing parts, with its gradient in coefficient space and a
//! finite-difference Hessian for critical-point classification.
//!
//! The kinetic and potential integrals use the trapezoid rule on a uniform
//! grid (spectrally accurate for these periodic integrands). The forcing
//! part is integrated in closed form from the trigonometric coefficients:
//! its integrand carries the non-periodic winding ramp, where the trapezoid
//! rule would lose accuracy. The gradient is assembled on the same grid, so
//! it is the derivative of the evaluated value up to roundoff.

use crate::error::{Error, Result};
use crate::loopspace::{LoopPath, WindingVector};
use crate::model::{Forcing, PendulumParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Action value split by term; `total = l1 + l2 + l3` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
}

impl ActionBreakdown {
    fn new(l1: f64, l2: f64, l3: f64) -> Self {
        Self { l1, l2, l3, total: l1 + l2 + l3 }
    }
}

/// Morse data of a near-critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    /// Eigenvalues of the symmetrized Hessian, ascending.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues below `-tau`.
    pub morse_index: usize,
    /// Count of eigenvalues in `[-tau, tau]`.
    pub zero_modes: usize,
    /// No zero modes beyond the expected circle mode (one iff `f == 0`).
    pub nondegenerate: bool,
    /// The threshold actually used, `1e-5 (1 + |H|)`.
    pub tau: f64,
}

/// Nondegeneracy band relative to the Hessian scale.
const TAU_ND_REL: f64 = 1e-5;

/// Gradient-norm factor below which a point counts as near-critical for
/// Hessian classification.
const NEAR_CRITICAL_REL: f64 = 1e-6;

/// Evaluator for one rotation problem: fixed parameters, forcing, winding,
/// period and discretization. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct ActionModel {
    params: PendulumParams,
    forcing: Forcing,
    winding: WindingVector,
    period: f64,
    k_trunc: usize,
    grid_m: usize,
    /// `cos(2 pi k m / M)` at `[(k-1) * M + m]`, `k = 1..=K`.
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    f_cos: Vec<Vec<f64>>,
    f_sin: Vec<Vec<f64>>,
    f_v: f64,
}

impl ActionModel {
    pub fn new(
        params: PendulumParams,
        forcing: Forcing,
        winding: WindingVector,
        period: f64,
        k_trunc: usize,
        grid_m: usize,
    ) -> Result<Self> {
        let n = params.n();
        if winding.n() != n || forcing.n() != n {
            return Err(Error::Mismatch("params, winding and forcing must agree on N".into()));
        }
        if forcing.period() != period {
            return Err(Error::Mismatch(format!(
                "forcing period {} != problem period {}",
                forcing.period(),
                period
            )));
        }
        if !(period > 0.0) || k_trunc == 0 {
            return Err(Error::InvalidParameter("need positive period and K >= 1".into()));
        }
        if grid_m < 2 * k_trunc + 2 {
            return Err(Error::InvalidParameter(format!(
                "grid M = {grid_m} too coarse for K = {k_trunc}"
            )));
        }
        let mut cos_tab = vec![0.0; k_trunc * grid_m];
        let mut sin_tab = vec![0.0; k_trunc * grid_m];
        for k in 1..=k_trunc {
            for m in 0..grid_m {
                let ph = TAU * (k * m % grid_m) as f64 / grid_m as f64;
                cos_tab[(k - 1) * grid_m + m] = ph.cos();
                sin_tab[(k - 1) * grid_m + m] = ph.sin();
            }
        }
        let (f_cos, f_sin) = forcing.dense_amplitudes(k_trunc);
        let f_v = f_moment_closed_form(&forcing, &winding);
        Ok(Self {
            params,
            forcing,
            winding,
            period,
            k_trunc,
            grid_m,
            cos_tab,
            sin_tab,
            f_cos,
            f_sin,
            f_v,
        })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn winding(&self) -> &WindingVector {
        &self.winding
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn k_trunc(&self) -> usize {
        self.k_trunc
    }

    pub fn grid_m(&self) -> usize {
        self.grid_m
    }

    /// `int f . (2 pi v t / T) dt`, independent of the loop.
    pub fn f_moment(&self) -> f64 {
        self.f_v
    }

    /// Coefficient-space dimension `N (2K + 1)`.
    pub fn dim(&self) -> usize {
        self.params.n() * (2 * self.k_trunc + 1)
    }

    fn idx_mean(&self, i: usize) -> usize {
        i * (2 * self.k_trunc + 1)
    }

    fn idx_cos(&self, i: usize, k: usize) -> usize {
        self.idx_mean(i) + k + 1
    }

    fn idx_sin(&self, i: usize, k: usize) -> usize {
        self.idx_mean(i) + self.k_trunc + k + 1
    }

    pub fn pack(&self, lp: &LoopPath) -> DVector<f64> {
        let n = self.params.n();
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            x[self.idx_mean(i)] = lp.xbar()[i];
            for k in 0..self.k_trunc {
                x[self.idx_cos(i, k)] = lp.cos_coef()[i][k];
                x[self.idx_sin(i, k)] = lp.sin_coef()[i][k];
            }
        }
        x
    }

    /// Rebuild a loop (mean reduced mod 2 pi) from a coefficient vector.
    pub fn unpack(&self, x: &DVector<f64>) -> LoopPath {
        let n = self.params.n();
        let mut xbar = vec![0.0; n];
        let mut cos_coef = vec![vec![0.0; self.k_trunc]; n];
        let mut sin_coef = vec![vec![0.0; self.k_trunc]; n];
        for i in 0..n {
            xbar[i] = x[self.idx_mean(i)];
            for k in 0..self.k_trunc {
                cos_coef[i][k] = x[self.idx_cos(i, k)];
                sin_coef[i][k] = x[self.idx_sin(i, k)];
            }
        }
        LoopPath::new(self.period, self.winding.clone(), xbar, cos_coef, sin_coef)
            .expect("coefficient vector has model shape")
    }

    /// Reconstruct `(q, qdot)` at grid node `m` into the provided buffers.
    fn sample_state(&self, x: &DVector<f64>, m: usize, q: &mut [f64], qd: &mut [f64]) {
        let n = self.params.n();
        let w = TAU / self.period;
        for i in 0..n {
            let base = self.idx_mean(i);
            let mut xi = x[base];
            let mut xdi = 0.0;
            for k in 0..self.k_trunc {
                let c = self.cos_tab[k * self.grid_m + m];
                let s = self.sin_tab[k * self.grid_m + m];
                let a = x[base + 1 + k];
                let b = x[base + 1 + self.k_trunc + k];
                let wk = w * (k + 1) as f64;
                xi += a * c + b * s;
                xdi += wk * (b * c - a * s);
            }
            let vi = self.winding.components()[i] as f64;
            q[i] = xi + TAU * vi * m as f64 / self.grid_m as f64;
            qd[i] = xdi + TAU * vi / self.period;
        }
    }

    /// The forcing term: `int f . xtilde` in closed form plus the winding
    /// moment `f_v` (the `f . xbar` term vanishes by zero mean).
    fn l3(&self, x: &DVector<f64>) -> f64 {
        let n = self.params.n();
        let mut coupling = 0.0;
        for i in 0..n {
            let base = self.idx_mean(i);
            for k in 0..self.k_trunc {
                coupling += self.f_cos[i][k] * x[base + 1 + k]
                    + self.f_sin[i][k] * x[base + 1 + self.k_trunc + k];
            }
        }
        self.period / 2.0 * coupling + self.f_v
    }

    pub fn breakdown(&self, x: &DVector<f64>) -> ActionBreakdown {
        let n = self.params.n();
        let h = self.period / self.grid_m as f64;
        let mut q = vec![0.0; n];
        let mut qd = vec![0.0; n];
        let mut a_buf = vec![0.0; n * n];
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for m in 0..self.grid_m {
            self.sample_state(x, m, &mut q, &mut qd);
            self.params.kinetic_matrix_into(&q, &mut a_buf);
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += a_buf[i * n + j] * qd[i] * qd[j];
                }
            }
            l1 += 0.5 * quad;
            l2 += self.params.potential(&q);
        }
        ActionBreakdown::new(l1 * h, l2 * h, self.l3(x))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.breakdown(x).total
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.value_and_gradient(x).1
    }

    /// Value and gradient from one pass over the grid. Per sample this
    /// accumulates the momentum covector `P = A(q) qdot` against the basis
    /// derivatives and the configuration covector
    /// `W = (1/2) d_q (A qdot . qdot) + V'(q)` against the basis values,
    /// then adds the closed-form forcing coupling; cost `O(M N (N + K))`.
    pub fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.params.n();
        let mm = self.grid_m;
        let h = self.period / mm as f64;
        let w = TAU / self.period;
        let mut q = vec![0.0; n];
        let mut qd = vec![0.0; n];
        let mut a_buf = vec![0.0; n * n];
        let mut g_buf = vec![0.0; n];
        let mut dv_buf = vec![0.0; n];
        let mut p_samples = vec![0.0; n * mm];
        let mut w_samples = vec![0.0; n * mm];
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for m in 0..mm {
            self.sample_state(x, m, &mut q, &mut qd);
            self.params.kinetic_matrix_into(&q, &mut a_buf);
            let mut quad = 0.0;
            for i in 0..n {
                let mut pi = 0.0;
                for j in 0..n {
                    pi += a_buf[i * n + j] * qd[j];
                }
                quad += pi * qd[i];
                p_samples[i * mm + m] = pi;
            }
            l1 += 0.5 * quad;
            l2 += self.params.potential(&q);
            self.params.kinetic_config_gradient_into(&q, &qd, &mut g_buf);
            self.params.potential_gradient_into(&q, &mut dv_buf);
            for i in 0..n {
                w_samples[i * mm + m] = g_buf[i] + dv_buf[i];
            }
        }

        let mut grad = DVector::zeros(self.dim());
        for i in 0..n {
            let base = self.idx_mean(i);
            let p_row = &p_samples[i * mm..(i + 1) * mm];
            let w_row = &w_samples[i * mm..(i + 1) * mm];
            grad[base] = h * w_row.iter().sum::<f64>();
            for k in 0..self.k_trunc {
                let c_row = &self.cos_tab[k * mm..(k + 1) * mm];
                let s_row = &self.sin_tab[k * mm..(k + 1) * mm];
                let wk = w * (k + 1) as f64;
                let mut ga = 0.0;
                let mut gb = 0.0;
                for m in 0..mm {
                    ga += -wk * p_row[m] * s_row[m] + w_row[m] * c_row[m];
                    gb += wk * p_row[m] * c_row[m] + w_row[m] * s_row[m];
                }
                grad[base + 1 + k] = h * ga + self.period / 2.0 * self.f_cos[i][k];
                grad[base + 1 + self.k_trunc + k] = h * gb + self.period / 2.0 * self.f_sin[i][k];
            }
        }
        (l1 * h + l2 * h + self.l3(x), grad)
    }

    /// Central finite differences of the analytic gradient, symmetrized.
    /// Only valid near a critical point.
    pub fn hessian_fd(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (val, grad) = self.value_and_gradient(x);
        let tol = NEAR_CRITICAL_REL * (1.0 + val.abs());
        if grad.norm() > tol {
            return Err(Error::NotCritical { grad_norm: grad.norm() });
        }
        Ok(self.hessian_fd_unchecked(x))
    }

    /// The same finite-difference Hessian without the near-critical gate;
    /// the solver's polishing phase needs it slightly away from criticality.
    pub(crate) fn hessian_fd_unchecked(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut hess = DMatrix::zeros(d, d);
        let mut xp = x.clone();
        for j in 0..d {
            let hj = 1e-5 * (1.0 + x[j].abs());
            xp[j] = x[j] + hj;
            let gp = self.gradient(&xp);
            xp[j] = x[j] - hj;
            let gm = self.gradient(&xp);
            xp[j] = x[j];
            for i in 0..d {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * hj);
            }
        }
        // symmetrize
        for i in 0..d {
            for j in (i + 1)..d {
                let s = 0.5 * (hess[(i, j)] + hess[(j, i)]);
                hess[(i, j)] = s;
                hess[(j, i)] = s;
            }
        }
        hess
    }

    /// Morse classification at a near-critical point.
    pub fn classify(&self, x: &DVector<f64>) -> Result<MorseData> {
        let hess = self.hessian_fd(x)?;
        let mut eigenvalues: Vec<f64> = hess.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
        let tau = TAU_ND_REL * (1.0 + scale);
        let morse_index = eigenvalues.iter().filter(|&&e| e < -tau).count();
        let zero_modes = eigenvalues.iter().filter(|&&e| e.abs() <= tau).count();
        let expected = usize::from(self.forcing.is_zero());
        Ok(MorseData {
            eigenvalues,
            morse_index,
            zero_modes,
            nondegenerate: zero_modes == expected,
            tau,
        })
    }
}

/// Closed form of `int_0^T f(t) . (2 pi v t / T) dt` for trig-polynomial
/// forcing: each sine harmonic `s sin(2 pi k t / T)` contributes
/// `-s v_i T / k`, cosine harmonics contribute nothing.
pub(crate) fn f_moment_closed_form(forcing: &Forcing, winding: &WindingVector) -> f64 {
    let mut acc = 0.0;
    for (i, comp) in forcing.components().iter().enumerate() {
        let vi = winding.components()[i] as f64;
        if vi == 0.0 {
            continue;
        }
        for h in comp {
            acc -= vi * forcing.period() * h.sin_amp / h.k as f64;
        }
    }
    acc
}
