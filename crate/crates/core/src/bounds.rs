//! Closed-form constants and runtime-checkable inequalities: the kinetic
//! floor `lambda`, the winding constant `gamma1`, the forcing constant
//! `gamma2`, signed level sums `beta(k)` with their gap `gamma` and half-gap
//! set, the feasible period window, the level ladder, the estimate oracles,
//! and a structured parameter search realizing the existential hypothesis.
//!
//! Every formula carries gravity through `g * beta`, so `g = 1` reproduces
//! the plain coefficient expressions.

use crate::action::{f_moment_closed_form, ActionModel};
use crate::error::{Error, Result};
use crate::loopspace::{LoopPath, WindingVector};
use crate::model::{Forcing, PendulumParams};
use crate::torus::tau;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Safety factor applied to the refined eigenvalue estimate wherever a
/// conservative (never overestimating) `lambda` is required.
pub const LAMBDA_SAFETY: f64 = 0.999;

/// Estimate of `inf_q min-eig A(q)`. The grid value is a guaranteed upper
/// bound on the infimum; the refined value is at most the grid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub grid: f64,
    pub refined: f64,
}

impl LambdaEstimate {
    /// `0.999 * refined`; slightly small only weakens derived bounds.
    pub fn conservative(&self) -> f64 {
        LAMBDA_SAFETY * self.refined
    }
}

fn min_eig_of_differences(params: &PendulumParams, deltas: &[f64]) -> f64 {
    let n = params.n();
    // q_n = 0, q_i = q_{i+1} + delta_i; A depends only on differences.
    let mut q = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        q[i] = q[i + 1] + deltas[i];
    }
    params.kinetic_matrix(&q).symmetric_eigenvalues().min()
}

/// Sweep the difference torus at `resolution` points per coordinate, then
/// refine the best point by three rounds of coordinate descent with halving
/// steps.
pub fn lambda_min(params: &PendulumParams, resolution: usize) -> LambdaEstimate {
    let n = params.n();
    debug_assert!(resolution >= 8);
    if n == 1 {
        let v = params.alpha()[0] * params.lengths()[0] * params.lengths()[0];
        return LambdaEstimate { grid: v, refined: v };
    }
    let dims = n - 1;
    let total = resolution.pow(dims as u32);
    let mut best = f64::INFINITY;
    let mut best_deltas = vec![0.0; dims];
    let mut deltas = vec![0.0; dims];
    for idx in 0..total {
        let mut rem = idx;
        for d in deltas.iter_mut() {
            *d = TAU * (rem % resolution) as f64 / resolution as f64;
            rem /= resolution;
        }
        let v = min_eig_of_differences(params, &deltas);
        if v < best {
            best = v;
            best_deltas.copy_from_slice(&deltas);
        }
    }
    let grid = best;
    let mut refined = best;
    let mut point = best_deltas;
    for _round in 0..3 {
        for d in 0..dims {
            let mut step = TAU / resolution as f64;
            for _ in 0..10 {
                for sign in [1.0, -1.0] {
                    let mut cand = point.clone();
                    cand[d] += sign * step;
                    let v = min_eig_of_differences(params, &cand);
                    if v < refined {
                        refined = v;
                        point = cand;
                    }
                }
                step *= 0.5;
            }
        }
    }
    LambdaEstimate { grid, refined }
}

/// `gamma1 = 2 pi^2 (sum alpha_i l_i^2 v_i^2 + sum_{i<j, v_i=v_j} 2 alpha_j
/// l_i l_j v_i v_j)`.
pub fn gamma1(params: &PendulumParams, winding: &WindingVector) -> f64 {
    let n = params.n();
    let v = winding.components();
    let l = params.lengths();
    let alpha = params.alpha();
    let mut sum = 0.0;
    for i in 0..n {
        sum += alpha[i] * l[i] * l[i] * (v[i] * v[i]) as f64;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if v[i] == v[j] {
                sum += 2.0 * alpha[j] * l[i] * l[j] * (v[i] * v[j]) as f64;
            }
        }
    }
    2.0 * PI * PI * sum
}

/// `gamma2 = (1 / 8 pi^2 lambda) sum (g beta_i + M0)^2`.
pub fn gamma2(params: &PendulumParams, m0: f64, lambda: f64) -> f64 {
    let sum: f64 = (0..params.n())
        .map(|i| {
            let t = params.gravity_beta(i) + m0;
            t * t
        })
        .sum();
    sum / (8.0 * PI * PI * lambda)
}

fn check_sigma(params: &PendulumParams, sigma: &[usize]) -> Result<()> {
    if sigma.is_empty() {
        return Err(Error::Infeasible(
            "N0 = 0: the level combinatorics require 1 <= N0 <= N-1".into(),
        ));
    }
    if sigma.iter().any(|&i| i >= params.n()) || sigma.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "sigma must be an increasing list of coordinate indices".into(),
        ));
    }
    Ok(())
}

/// Signed sum `beta(k) = sum_i (-1)^(1 - tau_i(k)) g beta_{sigma(i)}`,
/// `1 <= k <= 2^N0`, with `sigma` the increasing enumeration of the zero
/// winding components.
pub fn beta_of_k(params: &PendulumParams, sigma: &[usize], k: usize) -> Result<f64> {
    check_sigma(params, sigma)?;
    let bits = tau(k, sigma.len())?;
    Ok(sigma
        .iter()
        .zip(&bits)
        .map(|(&coord, &bit)| {
            let sign = if bit == 1 { 1.0 } else { -1.0 };
            sign * params.gravity_beta(coord)
        })
        .sum())
}

/// Minimal gap `gamma = min_k (beta(k+1) - beta(k))`.
pub fn gamma_gap(params: &PendulumParams, sigma: &[usize]) -> Result<f64> {
    check_sigma(params, sigma)?;
    let n = 1usize << sigma.len();
    let mut gamma = f64::INFINITY;
    let mut prev = beta_of_k(params, sigma, 1)?;
    for k in 2..=n {
        let cur = beta_of_k(params, sigma, k)?;
        gamma = gamma.min(cur - prev);
        prev = cur;
    }
    Ok(gamma)
}

/// The half-gap set, both as the closed form
/// `{ g beta_{sigma(N0)} } U { g beta_{sigma(i)} - sum_{j>i} g beta_{sigma(j)} }`
/// and as the direct half-differences; they must agree as sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSet {
    pub closed_form: Vec<f64>,
    pub half_differences: Vec<f64>,
}

fn sorted_dedup(mut vals: Vec<f64>) -> Vec<f64> {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
    vals
}

impl GammaSet {
    /// Set equality of the two routes up to floating tolerance.
    pub fn consistent(&self) -> bool {
        self.closed_form.len() == self.half_differences.len()
            && self
                .closed_form
                .iter()
                .zip(&self.half_differences)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
    }
}

pub fn gamma_set(params: &PendulumParams, sigma: &[usize]) -> Result<GammaSet> {
    check_sigma(params, sigma)?;
    let n0 = sigma.len();
    let mut closed = vec![params.gravity_beta(sigma[n0 - 1])];
    for i in 0..n0.saturating_sub(1) {
        let tail: f64 = sigma[(i + 1)..].iter().map(|&c| params.gravity_beta(c)).sum();
        closed.push(params.gravity_beta(sigma[i]) - tail);
    }
    let n = 1usize << n0;
    let mut halves = Vec::with_capacity(n - 1);
    let mut prev = beta_of_k(params, sigma, 1)?;
    for k in 2..=n {
        let cur = beta_of_k(params, sigma, k)?;
        halves.push(0.5 * (cur - prev));
        prev = cur;
    }
    Ok(GammaSet { closed_form: sorted_dedup(closed), half_differences: sorted_dedup(halves) })
}

/// Number of period samples checked against the window inequality.
const WINDOW_SAMPLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodWindow {
    pub feasible: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    /// `gamma / sqrt(gamma1 gamma2)`; feasible iff > 1.
    pub margin: f64,
    /// `gamma T^2 > gamma1 + gamma2 T^4` verified on a sample of the window.
    pub inequality_ok: bool,
}

impl PeriodWindow {
    pub fn contains(&self, t: f64) -> bool {
        match (self.t1, self.t2) {
            (Some(t1), Some(t2)) => self.feasible && t >= t1 && t <= t2,
            _ => false,
        }
    }
}

/// Feasibility `gamma > sqrt(gamma1 gamma2)` with `T1 = sqrt(gamma1 / gamma)`
/// and `T2 = sqrt(gamma / gamma2)`.
pub fn period_window(gamma: f64, gamma1: f64, gamma2: f64) -> PeriodWindow {
    let margin = gamma / (gamma1 * gamma2).sqrt();
    let feasible = gamma > (gamma1 * gamma2).sqrt();
    let (t1, t2) = if gamma > 0.0 {
        (Some((gamma1 / gamma).sqrt()), Some((gamma / gamma2).sqrt()))
    } else {
        (None, None)
    };
    let mut inequality_ok = true;
    if feasible {
        let (t1v, t2v) = (t1.unwrap(), t2.unwrap());
        for s in 0..WINDOW_SAMPLES {
            let t = t1v + (t2v - t1v) * s as f64 / (WINDOW_SAMPLES - 1) as f64;
            if gamma * t * t <= gamma1 + gamma2 * t.powi(4) {
                inequality_ok = false;
            }
        }
    }
    PeriodWindow { feasible, t1, t2, margin, inequality_ok }
}

/// `f_v = int_0^T f(t) . (2 pi v t / T) dt`, exact for trig-polynomial
/// forcing and independent of the loop mean.
pub fn f_moment(forcing: &Forcing, winding: &WindingVector) -> f64 {
    f_moment_closed_form(forcing, winding)
}

/// Global lower bound
/// `a0 = 2 pi^2 |v|^2 lambda / T + f_v - T sum g beta_i - T^3 ||f||^2 / (8 pi^2 lambda)`.
pub fn a_lower_bound(
    params: &PendulumParams,
    winding: &WindingVector,
    forcing: &Forcing,
    period: f64,
    lambda: f64,
) -> f64 {
    let f_norm = forcing.l2_norm();
    2.0 * PI * PI * winding.norm_sq() * lambda / period + f_moment(forcing, winding)
        - period * params.gravity_beta_sum()
        - period.powi(3) * f_norm * f_norm / (8.0 * PI * PI * lambda)
}

/// The level ladder for a feasible configuration at period `T`:
/// `C1(k) = gamma1/T + T beta(k) + f_v`,
/// `C2(k) = 2 pi^2 |v|^2 lambda / T + T beta(k+1) + f_v - T^3 gamma2`,
/// `a_k` their midpoint, and the cap `a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    /// `a_1 .. a_{n-1}` (midpoints).
    pub a: Vec<f64>,
    pub a_n: f64,
    pub f_v: f64,
    pub gamma: f64,
}

impl Levels {
    /// All thresholds in ascending order: `a_1, ..., a_{n-1}, a_n`.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut t = self.a.clone();
        t.push(self.a_n);
        t
    }

    /// Band index in `1..=n` such that the value lies in `[a_{k-1}, a_k)`,
    /// with `a_0 = -inf`; `None` above `a_n`.
    pub fn band_of(&self, value: f64) -> Option<usize> {
        self.thresholds().iter().position(|&a| value < a).map(|p| p + 1)
    }
}

pub fn levels(
    params: &PendulumParams,
    winding: &WindingVector,
    forcing: &Forcing,
    period: f64,
    lambda: f64,
) -> Result<Levels> {
    let sigma = winding.i0().to_vec();
    check_sigma(params, &sigma)?;
    let g1 = gamma1(params, winding);
    let g2 = gamma2(params, forcing.bound(), lambda);
    let gamma = gamma_gap(params, &sigma)?;
    let window = period_window(gamma, g1, g2);
    if !window.feasible {
        return Err(Error::Infeasible(format!(
            "gamma = {gamma:.6} <= sqrt(gamma1 gamma2) = {:.6}",
            (g1 * g2).sqrt()
        )));
    }
    if !window.contains(period) {
        return Err(Error::Infeasible(format!(
            "period {period} outside the window [{:.6}, {:.6}]",
            window.t1.unwrap(),
            window.t2.unwrap()
        )));
    }
    let n = 1usize << sigma.len();
    let f_v = f_moment(forcing, winding);
    let rot = 2.0 * PI * PI * winding.norm_sq() * lambda / period;
    let mut c1 = Vec::with_capacity(n - 1);
    let mut c2 = Vec::with_capacity(n - 1);
    let mut a = Vec::with_capacity(n - 1);
    for k in 1..n {
        let bk = beta_of_k(params, &sigma, k)?;
        let bk1 = beta_of_k(params, &sigma, k + 1)?;
        let c1k = g1 / period + period * bk + f_v;
        let c2k = rot + period * bk1 + f_v - period.powi(3) * g2;
        if c2k <= c1k {
            // The separation gamma T^2 - gamma1 - gamma2 T^4 > 0 holds only
            // on a strict sub-interval of [T1, T2] (it fails in zones at
            // both endpoints, where the defining quartic is positive); this
            // period sits in such a zone.
            return Err(Error::Infeasible(format!(
                "levels collapse at k = {k}: C2 = {c2k:.6} <= C1 = {c1k:.6}; period {period} \
                 lies in the endpoint zone of [T1, T2] where the window inequality fails"
            )));
        }
        c1.push(c1k);
        c2.push(c2k);
        a.push(0.5 * (c1k + c2k));
    }
    let beta_i0_sum: f64 = sigma.iter().map(|&c| params.gravity_beta(c)).sum();
    let a_n = g1 / period + period * beta_i0_sum + f_v + 1.0;
    let out = Levels { c1, c2, a, a_n, f_v, gamma };

    // Sandwich and ordering: these are theorems given feasibility, so a
    // failure is an implementation bug.
    for k in 0..(n - 1) {
        if !(out.c1[k] < out.a[k] && out.a[k] < out.c2[k]) {
            return Err(Error::CertificateViolation(format!(
                "level sandwich failed at k = {}: C1 {} a {} C2 {}",
                k + 1,
                out.c1[k],
                out.a[k],
                out.c2[k]
            )));
        }
    }
    let gap = period * gamma;
    for k in 0..n.saturating_sub(2) {
        if out.a[k + 1] - out.a[k] < gap * (1.0 - 1e-12) - 1e-12 {
            return Err(Error::CertificateViolation(format!(
                "level gap failed at k = {}: {} < T gamma = {}",
                k + 1,
                out.a[k + 1] - out.a[k],
                gap
            )));
        }
    }
    if out.a_n <= *out.a.last().unwrap() {
        return Err(Error::CertificateViolation(format!(
            "a_n = {} not above a_(n-1) = {}",
            out.a_n,
            out.a.last().unwrap()
        )));
    }
    Ok(out)
}

/// Everything the level theorems rest on, for one configuration and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub n0: usize,
    /// Increasing enumeration of the zero winding components (0-based).
    pub sigma: Vec<usize>,
    pub lambda_grid: f64,
    pub lambda: f64,
    pub lambda_conservative: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: Option<f64>,
    pub gamma_set: Option<GammaSet>,
    pub m0: f64,
    pub f_v: f64,
    pub feasible: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub margin: Option<f64>,
    pub window_inequality_ok: bool,
    pub period: f64,
    pub period_in_window: bool,
    pub a0: f64,
    pub levels: Option<Levels>,
}

pub fn constants_report(
    params: &PendulumParams,
    winding: &WindingVector,
    forcing: &Forcing,
    period: f64,
    lambda_resolution: usize,
) -> ConstantsReport {
    let est = lambda_min(params, lambda_resolution);
    let lam = est.conservative();
    let g1 = gamma1(params, winding);
    let m0 = forcing.bound();
    let g2 = gamma2(params, m0, lam);
    let sigma = winding.i0().to_vec();
    let n0 = sigma.len();
    let (gamma, gset) = if n0 >= 1 {
        (gamma_gap(params, &sigma).ok(), gamma_set(params, &sigma).ok())
    } else {
        (None, None)
    };
    let window = gamma.map(|g| period_window(g, g1, g2));
    let feasible = window.map(|w| w.feasible).unwrap_or(false);
    let period_in_window = window.map(|w| w.contains(period)).unwrap_or(false);
    let levels = if feasible && period_in_window {
        levels(params, winding, forcing, period, lam).ok()
    } else {
        None
    };
    ConstantsReport {
        n0,
        sigma,
        lambda_grid: est.grid,
        lambda: est.refined,
        lambda_conservative: lam,
        gamma1: g1,
        gamma2: g2,
        gamma,
        gamma_set: gset,
        m0,
        f_v: f_moment(forcing, winding),
        feasible,
        t1: window.and_then(|w| w.t1),
        t2: window.and_then(|w| w.t2),
        margin: window.map(|w| w.margin),
        window_inequality_ok: window.map(|w| w.inequality_ok).unwrap_or(true),
        period,
        period_in_window,
        a0: a_lower_bound(params, winding, forcing, period, lam),
        levels,
    }
}

/// One evaluated inequality; `holds` already accounts for the direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-9 * (1.0 + lhs.abs() + rhs.abs())
}

/// Evaluate the five estimate inequalities plus the global lower bound on a
/// given loop. `lambda` must come from a conservative kinetic-floor
/// estimate.
pub fn estimate_oracles(
    params: &PendulumParams,
    forcing: &Forcing,
    lp: &LoopPath,
    lambda: f64,
) -> Result<Vec<EstimateCheck>> {
    let winding = lp.winding().clone();
    let period = lp.period();
    let k = lp.k_trunc().max(1);
    let model = ActionModel::new(
        params.clone(),
        forcing.clone(),
        winding.clone(),
        period,
        k,
        (8 * k).max(64),
    )?;
    let x = model.pack(lp);
    let full = model.breakdown(&x);
    let mean_loop = LoopPath::constant(period, winding.clone(), lp.xbar().to_vec(), k)?;
    let mean = model.breakdown(&model.pack(&mean_loop));
    let norms = lp.norms();
    let dot_components: Vec<f64> = (0..params.n()).map(|i| lp.l2_dot_component(i)).collect();
    let f_norm = forcing.l2_norm();
    let m0 = forcing.bound();
    let wirtinger = period.powf(1.5) / TAU;

    let mut checks = Vec::with_capacity(6);
    // L1(x) >= (lambda/2) ||xdot||^2 + 2 pi^2 |v|^2 lambda / T
    let rhs = 0.5 * lambda * norms.l2_dot * norms.l2_dot
        + 2.0 * PI * PI * winding.norm_sq() * lambda / period;
    checks.push(EstimateCheck { name: "kinetic_lower", lhs: full.l1, rhs, holds: le(rhs, full.l1) });
    // L1(xbar) <= gamma1 / T
    let rhs = gamma1(params, &winding) / period;
    checks.push(EstimateCheck {
        name: "kinetic_mean_upper",
        lhs: mean.l1,
        rhs,
        holds: le(mean.l1, rhs),
    });
    // |L2(x) - L2(xbar)| <= (T^{3/2} / 2 pi) sum g beta_i ||xdot_i||
    let lhs = (full.l2 - mean.l2).abs();
    let rhs = wirtinger
        * dot_components
            .iter()
            .enumerate()
            .map(|(i, d)| params.gravity_beta(i) * d)
            .sum::<f64>();
    checks.push(EstimateCheck { name: "potential_offset", lhs, rhs, holds: le(lhs, rhs) });
    // |L3(x) - L3(xbar)| <= (T / 2 pi) sum ||f|| ||xdot_i||
    let lhs = (full.l3 - mean.l3).abs();
    let rhs = period / TAU * f_norm * dot_components.iter().sum::<f64>();
    checks.push(EstimateCheck { name: "forcing_offset", lhs, rhs, holds: le(lhs, rhs) });
    // combined offset with M0
    let lhs = ((full.l2 + full.l3) - (mean.l2 + mean.l3)).abs();
    let rhs = wirtinger
        * dot_components
            .iter()
            .enumerate()
            .map(|(i, d)| (params.gravity_beta(i) + m0) * d)
            .sum::<f64>();
    checks.push(EstimateCheck { name: "combined_offset", lhs, rhs, holds: le(lhs, rhs) });
    // L(x) >= a0
    let a0 = a_lower_bound(params, &winding, forcing, period, lambda);
    checks.push(EstimateCheck {
        name: "global_lower",
        lhs: full.total,
        rhs: a0,
        holds: le(a0, full.total),
    });
    Ok(checks)
}

/// Result of the structured parameter search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub params: PendulumParams,
    pub margin: f64,
    pub evaluated: usize,
    pub report: ConstantsReport,
}

/// Coarse eigen-sweep resolution used while scanning candidates.
const SEARCH_RESOLUTION: usize = 12;

/// Resolution used to confirm the winning candidate.
const CONFIRM_RESOLUTION: usize = 32;

/// Sweep a structured family (short rotating links, masses non-increasing
/// along the zero-winding block, block coefficients on a doubling profile)
/// and return the feasible candidate with the best margin
/// `gamma / sqrt(gamma1 gamma2)` among at most `budget` evaluations.
pub fn parameter_search(
    n: usize,
    winding: &WindingVector,
    m0: f64,
    budget: usize,
) -> Result<SearchOutcome> {
    if winding.n() != n {
        return Err(Error::Mismatch("winding length != N".into()));
    }
    let n0 = winding.n0();
    if n0 == 0 || n0 == n {
        return Err(Error::Infeasible(format!(
            "1 <= N0 <= N-1 required (got N0 = {n0})"
        )));
    }
    let sigma = winding.i0().to_vec();
    let rot_mass = [2.0f64, 5.0, 10.0, 20.0];
    let rot_len = [0.05f64, 0.1, 0.2, 0.4];
    let mass_decay = [1.0f64, 0.5];
    let scale = [2.0f64, 5.0, 10.0, 20.0];

    let mut evaluated = 0usize;
    let mut best: Option<(f64, PendulumParams)> = None;
    'sweep: for &mr in &rot_mass {
        for &lr in &rot_len {
            for &mu in &mass_decay {
                for &s in &scale {
                    if evaluated >= budget {
                        break 'sweep;
                    }
                    evaluated += 1;
                    let mut masses = vec![mr; n];
                    for (j, &coord) in sigma.iter().enumerate() {
                        masses[coord] = mu.powi(j as i32);
                    }
                    let mut lengths = vec![lr; n];
                    // alpha from the masses, then lengths realizing the
                    // doubling beta profile on the zero-winding block
                    let alpha: Vec<f64> = (0..n)
                        .map(|j| masses[j..].iter().sum::<f64>())
                        .collect();
                    for (j, &coord) in sigma.iter().enumerate() {
                        let target = s * (1u64 << (n0 - 1 - j)) as f64;
                        lengths[coord] = target / alpha[coord];
                    }
                    let Ok(params) = PendulumParams::new(masses, lengths, 1.0) else {
                        continue;
                    };
                    let lam = lambda_min(&params, SEARCH_RESOLUTION).conservative();
                    let g1 = gamma1(&params, winding);
                    let g2 = gamma2(&params, m0, lam);
                    let Ok(gamma) = gamma_gap(&params, &sigma) else { continue };
                    let margin = gamma / (g1 * g2).sqrt();
                    if best.as_ref().map(|(m, _)| margin > *m).unwrap_or(true) {
                        best = Some((margin, params));
                    }
                }
            }
        }
    }
    let (coarse_margin, params) = best.ok_or(Error::BudgetExhausted { best_margin: f64::NAN })?;
    // Confirm the winner at a finer eigen sweep.
    let lam = lambda_min(&params, CONFIRM_RESOLUTION).conservative();
    let g1 = gamma1(&params, winding);
    let g2 = gamma2(&params, m0, lam);
    let gamma = gamma_gap(&params, &sigma)?;
    let window = period_window(gamma, g1, g2);
    if !window.feasible {
        return Err(Error::BudgetExhausted { best_margin: window.margin.min(coarse_margin) });
    }
    let t_mid = 0.5 * (window.t1.unwrap() + window.t2.unwrap());
    let forcing = Forcing::zero(n, t_mid);
    let mut report = constants_report(&params, winding, &forcing, t_mid, CONFIRM_RESOLUTION);
    report.m0 = m0;
    report.gamma2 = g2;
    report.feasible = window.feasible;
    report.t1 = window.t1;
    report.t2 = window.t2;
    report.margin = Some(window.margin);
    Ok(SearchOutcome { params, margin: window.margin, evaluated, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopspace::validate_winding;
    use crate::model::Harmonic;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: &[f64], l: &[f64]) -> PendulumParams {
        PendulumParams::new(m.to_vec(), l.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn lambda_min_examples() {
        let est = lambda_min(&params(&[1.0], &[1.0]), 8);
        assert_eq!(est.refined, 1.0);
        assert_eq!(est.grid, 1.0);

        // Worst case at aligned links: (3 - sqrt 5) / 2.
        let est = lambda_min(&params(&[1.0, 1.0], &[1.0, 1.0]), 720);
        assert_relative_eq!(est.refined, (3.0 - 5f64.sqrt()) / 2.0, max_relative = 1e-9);
        assert!(est.grid >= est.refined);

        let est = lambda_min(&params(&[10.0, 1.0], &[0.1, 10.0]), 720);
        assert_relative_eq!(est.refined, 0.09998999099289542, max_relative = 1e-6);
    }

    #[test]
    fn lambda_scales_with_mass() {
        let base = lambda_min(&params(&[1.0, 2.0], &[1.0, 0.5]), 64);
        let scaled = lambda_min(&params(&[3.0, 6.0], &[1.0, 0.5]), 64);
        assert_relative_eq!(scaled.grid, 3.0 * base.grid, max_relative = 1e-12);
        assert_relative_eq!(scaled.refined, 3.0 * base.refined, max_relative = 1e-12);
    }

    #[test]
    fn gamma1_examples() {
        let w1 = validate_winding(&[1]).unwrap();
        assert_relative_eq!(gamma1(&params(&[1.0], &[1.0]), &w1), 2.0 * PI * PI);

        let w = validate_winding(&[1, 0]).unwrap();
        assert_relative_eq!(
            gamma1(&params(&[10.0, 1.0], &[0.1, 10.0]), &w),
            2.0 * PI * PI * 0.11,
            max_relative = 1e-12
        );

        let w = validate_winding(&[1, 1]).unwrap();
        assert_relative_eq!(
            gamma1(&params(&[1.0, 1.0], &[1.0, 1.0]), &w),
            10.0 * PI * PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gamma2_examples() {
        assert_relative_eq!(
            gamma2(&params(&[1.0], &[1.0]), 0.0, 1.0),
            1.0 / (8.0 * PI * PI),
            max_relative = 1e-12
        );

        let p = params(&[10.0, 1.0], &[0.1, 10.0]);
        let lam = lambda_min(&p, 720).refined;
        assert_relative_eq!(gamma2(&p, 0.0, lam), 12.819679368170002, max_relative = 1e-6);

        // Monotone in M0.
        assert!(gamma2(&p, 0.2, lam) > gamma2(&p, 0.1, lam));
    }

    #[test]
    fn beta_and_gamma_examples() {
        // N0 = 1: sigma = {1}, beta(1) = -g beta_2, beta(2) = +g beta_2.
        let p = params(&[10.0, 1.0], &[0.1, 10.0]);
        let sigma = [1usize];
        assert_relative_eq!(beta_of_k(&p, &sigma, 1).unwrap(), -10.0, max_relative = 1e-12);
        assert_relative_eq!(beta_of_k(&p, &sigma, 2).unwrap(), 10.0, max_relative = 1e-12);
        assert_relative_eq!(gamma_gap(&p, &sigma).unwrap(), 20.0, max_relative = 1e-12);
        let gs = gamma_set(&p, &sigma).unwrap();
        assert_eq!(gs.closed_form, vec![10.0]);
        assert!(gs.consistent());

        // N0 = 3 with beta_sigma = (8, 2, 1): Gamma = {1, 5}, gamma = 2.
        // alpha = (4, 3, 2, 1), so lengths (_, 8/3, 1, 1) hit those betas.
        let p = PendulumParams::new(
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 8.0 / 3.0, 1.0, 1.0],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(p.beta()[1], 8.0, max_relative = 1e-12);
        assert_relative_eq!(p.beta()[2], 2.0, max_relative = 1e-12);
        assert_relative_eq!(p.beta()[3], 1.0, max_relative = 1e-12);
        let sigma = [1usize, 2, 3];
        let gs = gamma_set(&p, &sigma).unwrap();
        assert_eq!(gs.closed_form.len(), 2);
        assert_relative_eq!(gs.closed_form[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(gs.closed_form[1], 5.0, max_relative = 1e-12);
        assert!(gs.consistent());
        assert_relative_eq!(gamma_gap(&p, &sigma).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_requires_zero_components() {
        let p = params(&[1.0, 1.0], &[1.0, 1.0]);
        assert!(gamma_gap(&p, &[]).is_err());
    }

    #[test]
    fn gamma_set_matches_brute_force_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n0 = rng.random_range(1..=6usize);
            // Random betas via a single-mass chain with random lengths.
            let masses = vec![1.0; n0 + 1];
            let lengths: Vec<f64> = (0..=n0).map(|_| rng.random_range(0.05..5.0)).collect();
            let p = PendulumParams::new(masses, lengths, 1.0).unwrap();
            let sigma: Vec<usize> = (1..=n0).collect();
            let gs = gamma_set(&p, &sigma).unwrap();
            assert!(gs.consistent(), "gamma set mismatch: {gs:?}");
            let gamma = gamma_gap(&p, &sigma).unwrap();
            let min_gamma = gs
                .half_differences
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert_relative_eq!(gamma, 2.0 * min_gamma, max_relative = 1e-9);
        }
    }

    #[test]
    fn period_window_examples() {
        // Exact boundary is infeasible (strict inequality).
        let w = period_window(2.0, 2.0, 2.0);
        assert!(!w.feasible);

        let p = params(&[10.0, 1.0], &[0.1, 10.0]);
        let winding = validate_winding(&[1, 0]).unwrap();
        let lam = lambda_min(&p, 256).conservative();
        let g1 = gamma1(&p, &winding);
        let g2 = gamma2(&p, 0.0, lam);
        let w = period_window(20.0, g1, g2);
        assert!(w.feasible);
        assert_relative_eq!(w.t1.unwrap(), 0.3294930172431321, max_relative = 1e-6);
        assert_relative_eq!(w.t2.unwrap(), 1.249, max_relative = 1e-3);
        assert!((w.margin - 3.79).abs() < 0.05);

        // Midpoint satisfies the window inequality strictly.
        let t = 0.5 * (w.t1.unwrap() + w.t2.unwrap());
        assert!(20.0 * t * t - g1 - g2 * t.powi(4) > 0.0);

        // The inequality provably fails at the window endpoints: the
        // quartic gamma2 u^2 - gamma u + gamma1 (u = T^2) is positive at
        // u = T1^2 and u = T2^2, so the sampled check reports violations.
        // They must match the root interval of the quartic exactly.
        assert!(!w.inequality_ok);
        let disc = (20.0f64 * 20.0 - 4.0 * g1 * g2).sqrt();
        let u_lo = (20.0 - disc) / (2.0 * g2);
        let u_hi = (20.0 + disc) / (2.0 * g2);
        let (t1, t2) = (w.t1.unwrap(), w.t2.unwrap());
        for s in 0..33 {
            let t = t1 + (t2 - t1) * s as f64 / 32.0;
            let holds = 20.0 * t * t > g1 + g2 * t.powi(4);
            let inside = t * t > u_lo && t * t < u_hi;
            assert_eq!(holds, inside, "violation pattern mismatch at T = {t}");
        }
    }

    #[test]
    fn period_window_widens_with_gamma() {
        let a = period_window(10.0, 2.0, 3.0);
        let b = period_window(12.0, 2.0, 3.0);
        assert!(b.t1.unwrap() < a.t1.unwrap());
        assert!(b.t2.unwrap() > a.t2.unwrap());
    }

    #[test]
    fn f_moment_examples() {
        let t_per = 1.7;
        let w = validate_winding(&[1, 0]).unwrap();
        assert_eq!(f_moment(&Forcing::zero(2, t_per), &w), 0.0);

        let eps = 0.3;
        let f = Forcing::new(
            t_per,
            vec![vec![Harmonic { k: 1, cos_amp: 0.0, sin_amp: eps }], vec![]],
        )
        .unwrap();
        assert_relative_eq!(f_moment(&f, &w), -eps * t_per, max_relative = 1e-12);

        let f = Forcing::new(
            t_per,
            vec![vec![Harmonic { k: 1, cos_amp: eps, sin_amp: 0.0 }], vec![]],
        )
        .unwrap();
        assert_abs_diff_eq!(f_moment(&f, &w), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn levels_structure() {
        let p = params(&[10.0, 1.0], &[0.1, 10.0]);
        let winding = validate_winding(&[1, 0]).unwrap();
        let lam = lambda_min(&p, 256).conservative();
        let t = 0.6;
        let f = Forcing::zero(2, t);
        let lv = levels(&p, &winding, &f, t, lam).unwrap();
        assert_eq!(lv.c1.len(), 1);
        // Midpoint property.
        assert_relative_eq!(lv.a[0] - lv.c1[0], lv.c2[0] - lv.a[0], max_relative = 1e-9);
        // Frozen from the closed forms.
        assert_relative_eq!(lv.c1[0], -2.3811450529339013, max_relative = 1e-4);
        assert_relative_eq!(lv.c2[0], 6.514426745619848, max_relative = 1e-3);
        assert!(lv.c2[0] - lv.c1[0] > 0.0);
        assert!(lv.a_n > lv.a[0]);

        // Outside the window: refused with a diagnostic.
        assert!(levels(&p, &winding, &Forcing::zero(2, 2.0), 2.0, lam).is_err());
    }

    #[test]
    fn estimate_oracles_hold_on_random_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let p = params(&[1.0, 1.0], &[1.0, 1.0]);
        let winding = validate_winding(&[1, 0]).unwrap();
        let lam = lambda_min(&p, 128).conservative();
        let f = Forcing::new(
            1.0,
            vec![vec![Harmonic { k: 1, cos_amp: 0.03, sin_amp: 0.1 }], vec![]],
        )
        .unwrap();
        for i in 0..200 {
            let lp = LoopPath::random_smooth(&mut rng, 1.0, winding.clone(), 8, 2.0);
            let checks = estimate_oracles(&p, &f, &lp, lam).unwrap();
            assert_eq!(checks.len(), 6);
            for c in &checks {
                assert!(c.holds, "{} failed on draw {i}: lhs {} rhs {}", c.name, c.lhs, c.rhs);
            }
        }
        // Constant loop: the potential offset is 0 <= 0.
        let lp = LoopPath::constant(1.0, winding.clone(), vec![0.3, 1.0], 8).unwrap();
        let checks = estimate_oracles(&p, &f, &lp, lam).unwrap();
        let vq = checks.iter().find(|c| c.name == "potential_offset").unwrap();
        assert_abs_diff_eq!(vq.lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vq.rhs, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn parameter_search_finds_the_known_family() {
        let w = validate_winding(&[1, 0]).unwrap();
        let out = parameter_search(2, &w, 0.0, 200).unwrap();
        assert!(out.margin > 3.0, "margin {}", out.margin);
        assert!(out.report.feasible);

        let w3 = validate_winding(&[1, 0, 0]).unwrap();
        let out = parameter_search(3, &w3, 0.01, 200).unwrap();
        assert!(out.margin > 1.0, "margin {}", out.margin);

        // N0 = 0 violates the hypothesis.
        let w_rot = validate_winding(&[1, 1]).unwrap();
        assert!(parameter_search(2, &w_rot, 0.0, 10).is_err());
    }

    #[test]
    fn constants_report_assembles() {
        let p = params(&[10.0, 1.0], &[0.1, 10.0]);
        let winding = validate_winding(&[1, 0]).unwrap();
        let f = Forcing::zero(2, 0.6);
        let r = constants_report(&p, &winding, &f, 0.6, 128);
        assert!(r.lambda > 0.0 && r.gamma2 > 0.0);
        assert!(r.feasible && r.period_in_window);
        assert!(r.levels.is_some());
        assert!(r.t1.unwrap() < r.t2.unwrap());
        assert!(r.a0 < r.levels.as_ref().unwrap().a[0]);
    }
}
