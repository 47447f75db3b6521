//! Discrete loops with winding: a mean point on the torus plus a zero-mean
//! trigonometric part, together with norms, the time-shift action and a
//! symmetry-quotient distance.
//!
//! A loop reconstructs the trajectory `q(t) = xbar + xtilde(t) + 2 pi v t / T`,
//! which gains exactly `2 pi v` over one period.

use crate::error::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Integer winding vector, validated to be prime: either a single unit
/// coordinate with the rest zero, or some pair of coordinates relatively
/// prime. `i0` collects the (0-based) indices of zero components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindingVector {
    v: Vec<i64>,
    i0: Vec<usize>,
}

/// Accepts `v` iff it is prime. The "relatively prime" clause is read as
/// SOME pair of coordinates being coprime; do not silently change this.
pub fn validate_winding(v: &[i64]) -> Result<WindingVector> {
    if v.is_empty() || v.iter().all(|&c| c == 0) {
        return Err(Error::InvalidWinding("zero vector".into()));
    }
    let nonzero = v.iter().filter(|&&c| c != 0).count();
    let single_unit = nonzero == 1 && v.iter().any(|&c| c.abs() == 1);
    let some_coprime_pair = (0..v.len()).any(|i| {
        ((i + 1)..v.len()).any(|j| gcd(v[i].unsigned_abs(), v[j].unsigned_abs()) == 1)
    });
    if !single_unit && !some_coprime_pair {
        return Err(Error::InvalidWinding(format!(
            "{v:?} is not prime: no unit coordinate and no coprime pair"
        )));
    }
    let i0 = v.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect();
    Ok(WindingVector { v: v.to_vec(), i0 })
}

impl WindingVector {
    pub fn new(v: Vec<i64>) -> Result<Self> {
        validate_winding(&v)
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.v
    }

    /// Number of zero components.
    pub fn n0(&self) -> usize {
        self.i0.len()
    }

    /// 0-based indices of zero components, increasing. This is also the
    /// increasing enumeration used for the level combinatorics.
    pub fn i0(&self) -> &[usize] {
        &self.i0
    }

    pub fn norm_sq(&self) -> f64 {
        self.v.iter().map(|&c| (c * c) as f64).sum()
    }
}

/// Norms of the oscillating part and the full loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopNorms {
    /// `||xtilde||_{L^2}`
    pub l2_tilde: f64,
    /// `||d/dt x||_{L^2}`
    pub l2_dot: f64,
    /// `||x||_{W^{1,2}}` (mean included in the L^2 part)
    pub w12: f64,
}

/// A loop: mean angles in `[0, 2 pi)` plus Fourier coefficients of the
/// zero-mean part, harmonics `1..=k_trunc` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    period: f64,
    winding: WindingVector,
    xbar: Vec<f64>,
    cos_coef: Vec<Vec<f64>>,
    sin_coef: Vec<Vec<f64>>,
}

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r == TAU { 0.0 } else { r }
}

impl LoopPath {
    pub fn new(
        period: f64,
        winding: WindingVector,
        xbar: Vec<f64>,
        cos_coef: Vec<Vec<f64>>,
        sin_coef: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = winding.n();
        if xbar.len() != n || cos_coef.len() != n || sin_coef.len() != n {
            return Err(Error::Mismatch("coefficient arrays must have N rows".into()));
        }
        let k = cos_coef.first().map_or(0, Vec::len);
        if cos_coef.iter().any(|r| r.len() != k) || sin_coef.iter().any(|r| r.len() != k) {
            return Err(Error::Mismatch("ragged coefficient arrays".into()));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidParameter(format!("period {period} not positive")));
        }
        let xbar = xbar.into_iter().map(reduce_angle).collect();
        Ok(Self { period, winding, xbar, cos_coef, sin_coef })
    }

    /// Constant loop at `xbar` (zero oscillating part).
    pub fn constant(period: f64, winding: WindingVector, xbar: Vec<f64>, k_trunc: usize) -> Result<Self> {
        let n = winding.n();
        Self::new(period, winding, xbar, vec![vec![0.0; k_trunc]; n], vec![vec![0.0; k_trunc]; n])
    }

    /// Random loop with geometrically decaying harmonics, rescaled so that
    /// `||xtilde||_{W^{1,2}}` equals `target_norm`. Smooth by construction.
    pub fn random_smooth<R: Rng>(
        rng: &mut R,
        period: f64,
        winding: WindingVector,
        k_trunc: usize,
        target_norm: f64,
    ) -> Self {
        let n = winding.n();
        let xbar: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let mut cos_coef = vec![vec![0.0; k_trunc]; n];
        let mut sin_coef = vec![vec![0.0; k_trunc]; n];
        for i in 0..n {
            for k in 0..k_trunc {
                let decay = (-(k as f64) / 4.0).exp();
                cos_coef[i][k] = rng.random_range(-1.0..1.0) * decay;
                sin_coef[i][k] = rng.random_range(-1.0..1.0) * decay;
            }
        }
        let mut lp = Self { period, winding, xbar, cos_coef, sin_coef };
        let norms = lp.norms();
        let cur = (norms.l2_tilde.powi(2) + norms.l2_dot.powi(2)).sqrt();
        if cur > 0.0 && target_norm > 0.0 {
            let s = target_norm / cur;
            for row in lp.cos_coef.iter_mut().chain(lp.sin_coef.iter_mut()) {
                for c in row.iter_mut() {
                    *c *= s;
                }
            }
        }
        lp
    }

    pub fn n(&self) -> usize {
        self.winding.n()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn winding(&self) -> &WindingVector {
        &self.winding
    }

    pub fn k_trunc(&self) -> usize {
        self.cos_coef.first().map_or(0, Vec::len)
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn cos_coef(&self) -> &[Vec<f64>] {
        &self.cos_coef
    }

    pub fn sin_coef(&self) -> &[Vec<f64>] {
        &self.sin_coef
    }

    /// Evaluate `(q, qdot)` at time `t`.
    pub fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.n();
        let w = TAU / self.period;
        let mut q = DVector::zeros(n);
        let mut qd = DVector::zeros(n);
        for i in 0..n {
            let mut x = self.xbar[i];
            let mut xd = 0.0;
            for (k0, (&a, &b)) in self.cos_coef[i].iter().zip(&self.sin_coef[i]).enumerate() {
                let wk = w * (k0 + 1) as f64;
                let (s, c) = (wk * t).sin_cos();
                x += a * c + b * s;
                xd += wk * (b * c - a * s);
            }
            let rot = TAU * self.winding.components()[i] as f64 / self.period;
            q[i] = x + rot * t;
            qd[i] = xd + rot;
        }
        (q, qd)
    }

    /// Second derivative of the reconstruction (the winding term drops out).
    pub fn eval_accel(&self, t: f64) -> DVector<f64> {
        let n = self.n();
        let w = TAU / self.period;
        let mut qdd = DVector::zeros(n);
        for i in 0..n {
            let mut a2 = 0.0;
            for (k0, (&a, &b)) in self.cos_coef[i].iter().zip(&self.sin_coef[i]).enumerate() {
                let wk = w * (k0 + 1) as f64;
                let (s, c) = (wk * t).sin_cos();
                a2 -= wk * wk * (a * c + b * s);
            }
            qdd[i] = a2;
        }
        qdd
    }

    /// Exact Parseval norms, no quadrature involved.
    pub fn norms(&self) -> LoopNorms {
        let w = TAU / self.period;
        let mut tilde_sq = 0.0;
        let mut dot_sq = 0.0;
        for i in 0..self.n() {
            for (k0, (&a, &b)) in self.cos_coef[i].iter().zip(&self.sin_coef[i]).enumerate() {
                let wk = w * (k0 + 1) as f64;
                let amp = a * a + b * b;
                tilde_sq += amp;
                dot_sq += wk * wk * amp;
            }
        }
        tilde_sq *= self.period / 2.0;
        dot_sq *= self.period / 2.0;
        let mean_sq: f64 = self.period * self.xbar.iter().map(|x| x * x).sum::<f64>();
        LoopNorms {
            l2_tilde: tilde_sq.sqrt(),
            l2_dot: dot_sq.sqrt(),
            w12: (mean_sq + tilde_sq + dot_sq).sqrt(),
        }
    }

    /// Per-coordinate `L^2` norm of the derivative, `||xdot_i||`.
    pub fn l2_dot_component(&self, i: usize) -> f64 {
        let w = TAU / self.period;
        let mut dot_sq = 0.0;
        for (k0, (&a, &b)) in self.cos_coef[i].iter().zip(&self.sin_coef[i]).enumerate() {
            let wk = w * (k0 + 1) as f64;
            dot_sq += wk * wk * (a * a + b * b);
        }
        (self.period / 2.0 * dot_sq).sqrt()
    }

    /// Fraction of `||xtilde||_{W^{1,2}}` carried by the top quartile of
    /// harmonics; the under-resolution monitor in the solver watches this.
    pub fn spectral_tail_fraction(&self) -> f64 {
        let k = self.k_trunc();
        if k == 0 {
            return 0.0;
        }
        let w = TAU / self.period;
        let cut = k - k / 4;
        let mut total = 0.0;
        let mut tail = 0.0;
        for i in 0..self.n() {
            for (k0, (&a, &b)) in self.cos_coef[i].iter().zip(&self.sin_coef[i]).enumerate() {
                let wk = w * (k0 + 1) as f64;
                let term = (1.0 + wk * wk) * (a * a + b * b);
                total += term;
                if k0 >= cut {
                    tail += term;
                }
            }
        }
        if total == 0.0 { 0.0 } else { (tail / total).sqrt() }
    }

    /// The circle action: the returned loop reconstructs `q(t + theta)`.
    /// Coefficients pick up the phase `2 pi k theta / T`; the mean moves by
    /// `2 pi v theta / T` and is reduced mod `2 pi`.
    pub fn time_shift(&self, theta: f64) -> LoopPath {
        let theta = theta.rem_euclid(self.period);
        let w = TAU / self.period;
        let n = self.n();
        let k = self.k_trunc();
        let mut out = self.clone();
        for i in 0..n {
            for k0 in 0..k {
                let phase = w * (k0 + 1) as f64 * theta;
                let (s, c) = phase.sin_cos();
                let a = self.cos_coef[i][k0];
                let b = self.sin_coef[i][k0];
                out.cos_coef[i][k0] = a * c + b * s;
                out.sin_coef[i][k0] = b * c - a * s;
            }
            out.xbar[i] = reduce_angle(
                self.xbar[i] + TAU * self.winding.components()[i] as f64 * theta / self.period,
            );
        }
        out
    }

    fn compatible(&self, other: &LoopPath) -> Result<()> {
        if self.winding != other.winding
            || self.period != other.period
            || self.k_trunc() != other.k_trunc()
        {
            return Err(Error::Mismatch(
                "loops must share N, winding, period and truncation order".into(),
            ));
        }
        Ok(())
    }

    /// `W^{1,2}` distance after quotienting the `2 pi Z^N` mean shifts.
    fn distance_mean_quotient(&self, other: &LoopPath) -> f64 {
        let mut mean_sq = 0.0;
        for (a, b) in self.xbar.iter().zip(&other.xbar) {
            let d = (a - b).rem_euclid(TAU);
            let d = d.min(TAU - d);
            mean_sq += d * d;
        }
        mean_sq *= self.period;
        let w = TAU / self.period;
        let mut osc_sq = 0.0;
        for i in 0..self.n() {
            for k0 in 0..self.k_trunc() {
                let wk = w * (k0 + 1) as f64;
                let da = self.cos_coef[i][k0] - other.cos_coef[i][k0];
                let db = self.sin_coef[i][k0] - other.sin_coef[i][k0];
                osc_sq += (1.0 + wk * wk) * (da * da + db * db);
            }
        }
        osc_sq *= self.period / 2.0;
        (mean_sq + osc_sq).sqrt()
    }
}

/// Number of grid points in the coarse time-shift scan.
const THETA_GRID: usize = 256;

/// Pseudometric realizing "distinct" solutions: minimum over the torus
/// identification of the means and, when `quotient_time_shift` is set, over
/// the circle action (coarse scan refined by golden-section search).
pub fn distance_mod_symmetries(
    a: &LoopPath,
    b: &LoopPath,
    quotient_time_shift: bool,
) -> Result<f64> {
    a.compatible(b)?;
    if !quotient_time_shift {
        return Ok(a.distance_mean_quotient(b));
    }
    let t = a.period();
    let dist_at = |theta: f64| a.distance_mean_quotient(&b.time_shift(theta));
    let mut best = (0usize, f64::INFINITY);
    for s in 0..THETA_GRID {
        let d = dist_at(t * s as f64 / THETA_GRID as f64);
        if d < best.1 {
            best = (s, d);
        }
    }
    // Golden-section refinement on the bracket around the best grid point.
    let h = t / THETA_GRID as f64;
    let mut lo = best.0 as f64 * h - h;
    let mut hi = best.0 as f64 * h + h;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = dist_at(x1);
    let mut f2 = dist_at(x2);
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = dist_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = dist_at(x2);
        }
    }
    Ok(best.1.min(f1).min(f2))
}
