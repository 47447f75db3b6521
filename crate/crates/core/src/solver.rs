//! Multistart critical-point search on the discretized loop space,
//! deduplication modulo the torus and circle symmetries, and the census
//! that compares the count of certified solutions against the multiplicity
//! lower bounds.
//!
//! The minimizer is a limited-memory quasi-Newton descent with a diagonal
//! preconditioner built from the small-oscillation curvature. Seeds sit at
//! the sign corners of the zero-winding block; when the forcing is odd the
//! corner seeds lie in the fixed locus of the involution
//! `x(t) -> -x(-t)`, and descent restricted to that locus converges to
//! critical points whose full gradient also vanishes (checked explicitly),
//! which is how saddle-type solutions become descent-reachable.

use crate::action::{ActionBreakdown, ActionModel, MorseData};
use crate::bounds::{self, ConstantsReport};
use crate::error::{Error, Result};
use crate::loopspace::{distance_mod_symmetries, LoopPath, WindingVector};
use crate::model::{Forcing, PendulumParams};
use crate::verify::{certify, Certification};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Mean-grid density per free (rotating) torus coordinate.
    pub density: usize,
    /// Random oscillating perturbations per mean grid point.
    pub perturbations: usize,
    pub seed: u64,
    /// Relative convergence factor: converged iff
    /// `|grad| <= tol_conv (1 + |action|)`.
    pub tol_conv: f64,
    pub max_iters: usize,
    /// Two records are distinct iff their symmetry-quotient distance
    /// exceeds `dedupe_tol (1 + norm)`.
    pub dedupe_tol: f64,
    pub threads: usize,
    pub lambda_resolution: usize,
    pub certify_steps: usize,
    /// Override the automatic circle-quotient choice (`f == 0`).
    pub quotient_time_shift: Option<bool>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            density: 8,
            perturbations: 4,
            seed: 42,
            tol_conv: 1e-8,
            max_iters: 2000,
            dedupe_tol: 1e-4,
            threads: 1,
            lambda_resolution: 64,
            certify_steps: 4096,
            quotient_time_shift: None,
        }
    }
}

/// Norm budget for the random oscillating part of perturbed seeds.
const SEED_PERTURBATION_NORM: f64 = 0.3;

/// Spectral-tail fraction above which a record is flagged under-resolved.
const TAIL_FLAG: f64 = 1e-6;

/// One starting point of the multistart plan.
#[derive(Debug, Clone)]
pub struct Seed {
    pub id: usize,
    pub loop_path: LoopPath,
    /// Restrict the optimization to the sine-only fixed locus first.
    pub sine_mask: bool,
}

/// Deterministic multistart plan: sign corners on the zero-winding block,
/// a uniform grid on the rotating means, zero oscillation plus random
/// smooth perturbations.
pub fn seed_plan(model: &ActionModel, opts: &SolverOptions) -> Vec<Seed> {
    let n = model.params().n();
    let winding = model.winding();
    let k = model.k_trunc();
    let odd_forcing = model.forcing().is_odd();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut mean_axes: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if winding.i0().contains(&i) {
            mean_axes.push(vec![0.0, PI]);
        } else {
            mean_axes.push(
                (0..opts.density.max(1))
                    .map(|j| TAU * j as f64 / opts.density.max(1) as f64)
                    .collect(),
            );
        }
    }
    let mut means = vec![Vec::new()];
    for axis in &mean_axes {
        let mut next = Vec::with_capacity(means.len() * axis.len());
        for prefix in &means {
            for &val in axis {
                let mut m = prefix.clone();
                m.push(val);
                next.push(m);
            }
        }
        means = next;
    }

    let mut seeds = Vec::new();
    let mut id = 0usize;
    for mean in &means {
        let symmetric = odd_forcing && mean.iter().all(|&x| x == 0.0 || x == PI);
        let base = LoopPath::constant(model.period(), winding.clone(), mean.clone(), k)
            .expect("constant seed");
        seeds.push(Seed { id, loop_path: base, sine_mask: symmetric });
        id += 1;
        for _ in 0..opts.perturbations {
            let norm = SEED_PERTURBATION_NORM * rng.random_range(0.25..=1.0);
            let mut lp =
                LoopPath::random_smooth(&mut rng, model.period(), winding.clone(), k, norm);
            let coef = (lp.cos_coef().to_vec(), lp.sin_coef().to_vec());
            lp = LoopPath::new(model.period(), winding.clone(), mean.clone(), coef.0, coef.1)
                .expect("perturbed seed");
            seeds.push(Seed { id, loop_path: lp, sine_mask: false });
            id += 1;
        }
    }
    seeds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinimizeOutcome {
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub outcome: MinimizeOutcome,
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Action value of every accepted iterate, non-increasing.
    pub action_trace: Vec<f64>,
}

/// Small-oscillation diagonal curvature used as the quasi-Newton metric.
fn preconditioner(model: &ActionModel) -> DVector<f64> {
    let params = model.params();
    let n = params.n();
    let k = model.k_trunc();
    let t = model.period();
    let w = TAU / t;
    let m0 = model.forcing().bound();
    let mut d = DVector::from_element(model.dim(), 1.0);
    for i in 0..n {
        let diag_a = params.alpha()[i] * params.lengths()[i] * params.lengths()[i];
        let soft = params.gravity_beta(i) + m0 + 0.1;
        let base = i * (2 * k + 1);
        d[base] = t * soft;
        for kk in 0..k {
            let wk = w * (kk + 1) as f64;
            let scale = 0.5 * t * (diag_a * wk * wk + soft);
            d[base + 1 + kk] = scale;
            d[base + 1 + k + kk] = scale;
        }
    }
    d
}

struct LbfgsMemory {
    pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    capacity: usize,
}

impl LbfgsMemory {
    fn new(capacity: usize) -> Self {
        Self { pairs: VecDeque::new(), capacity }
    }

    fn push(&mut self, s: DVector<f64>, y: DVector<f64>) {
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if self.pairs.len() == self.capacity {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Two-loop recursion with diagonal initial metric `inv_diag`.
    fn direction(&self, grad: &DVector<f64>, inv_diag: &DVector<f64>) -> DVector<f64> {
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q -= y * a;
            alphas.push(a);
        }
        let gamma = self.pairs.back().map_or(1.0, |(s, y, _)| {
            let denom = y.component_mul(inv_diag).dot(y);
            if denom > 0.0 {
                s.dot(y) / denom
            } else {
                1.0
            }
        });
        let mut r = q.component_mul(inv_diag) * gamma;
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r += s * (a - b);
        }
        -r
    }
}

/// Quasi-Newton descent with backtracking line search. For sine-masked
/// seeds the iteration runs in the fixed locus first; convergence is always
/// declared on the full gradient.
pub fn minimize(model: &ActionModel, seed: &Seed, opts: &SolverOptions) -> MinimizeResult {
    let dim = model.dim();
    let n = model.params().n();
    let k = model.k_trunc();
    let mask: Option<DVector<f64>> = seed.sine_mask.then(|| {
        let mut m = DVector::zeros(dim);
        for i in 0..n {
            let base = i * (2 * k + 1);
            for kk in 0..k {
                m[base + 1 + k + kk] = 1.0;
            }
        }
        m
    });

    let inv_diag = preconditioner(model).map(|d| 1.0 / d);
    let mut x = model.pack(&seed.loop_path);
    let (mut value, mut grad_full) = model.value_and_gradient(&x);
    let mut mask_active = mask.is_some();
    let mut memory = LbfgsMemory::new(10);
    let mut trace = vec![value];
    let mut iterations = 0usize;
    let mut outcome = MinimizeOutcome::MaxIters;

    let masked = |g: &DVector<f64>, active: bool| -> DVector<f64> {
        match (&mask, active) {
            (Some(m), true) => g.component_mul(m),
            _ => g.clone(),
        }
    };

    while iterations < opts.max_iters {
        let grad = masked(&grad_full, mask_active);
        let tol = opts.tol_conv * (1.0 + value.abs());
        if grad.norm() <= tol {
            if mask_active {
                if grad_full.norm() <= tol {
                    outcome = MinimizeOutcome::Converged;
                    break;
                }
                // Constrained critical point is not a full critical point:
                // release the mask and keep descending.
                mask_active = false;
                memory.clear();
                continue;
            }
            outcome = MinimizeOutcome::Converged;
            break;
        }

        let mut dir = memory.direction(&grad, &inv_diag);
        let mut slope = dir.dot(&grad);
        if !(slope < 0.0) || !slope.is_finite() {
            memory.clear();
            dir = -grad.component_mul(&inv_diag);
            slope = dir.dot(&grad);
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let x_new = &x + &dir * step;
            let (v_new, g_new) = model.value_and_gradient(&x_new);
            if v_new.is_finite() && v_new <= value + 1e-4 * step * slope {
                let s = &x_new - &x;
                let y = masked(&g_new, mask_active) - &grad;
                memory.push(s, y);
                x = x_new;
                value = v_new;
                grad_full = g_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No certifiable decrease left along quasi-Newton or steepest
            // descent: the useful decrease has fallen below the float
            // resolution of the value. Hand over to the polish below.
            if memory.pairs.is_empty() {
                outcome = MinimizeOutcome::Stalled;
                break;
            }
            memory.clear();
            continue;
        }
        trace.push(value);
    }

    // Newton polish on the gradient system. Armijo descent cannot certify
    // progress once the attainable decrease drops under the value's float
    // granularity, which happens around |grad| ~ sqrt(eps |L|) -- above the
    // convergence tolerance. Near-singular modes (the circle mode of the
    // unforced problem) are filtered out of the step; acceptance is by
    // gradient-norm reduction, which also converges to saddle points.
    let near = 1e-3 * (1.0 + value.abs());
    let target = opts.tol_conv * 1e-4 * (1.0 + value.abs());
    if grad_full.norm() <= near {
        let mut eig = None;
        let mut fresh = false;
        for _ in 0..40 {
            if grad_full.norm() <= target {
                break;
            }
            // Frozen Newton: reuse the factorization while it keeps
            // shrinking the gradient, refresh it once on stall.
            if eig.is_none() {
                eig = Some(model.hessian_fd_unchecked(&x).symmetric_eigen());
                fresh = true;
            }
            let decomp = eig.as_ref().unwrap();
            let scale = decomp.eigenvalues.amax();
            if !(scale > 0.0) {
                break;
            }
            let filter = 1e-9 * scale;
            let coeffs = decomp.eigenvectors.transpose() * &grad_full;
            let mut step_coeffs = DVector::zeros(coeffs.len());
            for (i, &lam) in decomp.eigenvalues.iter().enumerate() {
                if lam.abs() > filter {
                    step_coeffs[i] = -coeffs[i] / lam;
                }
            }
            let mut delta = &decomp.eigenvectors * step_coeffs;
            let cap = 1.0;
            if delta.norm() > cap {
                delta *= cap / delta.norm();
            }
            let mut improved = false;
            let mut scale_step = 1.0;
            for _ in 0..6 {
                let x_new = &x + &delta * scale_step;
                let (v_new, g_new) = model.value_and_gradient(&x_new);
                if g_new.norm() < 0.9 * grad_full.norm() {
                    x = x_new;
                    value = v_new;
                    grad_full = g_new;
                    improved = true;
                    break;
                }
                scale_step *= 0.5;
            }
            if !improved {
                if fresh {
                    break;
                }
                eig = None;
                fresh = false;
            }
        }
    }

    // Final convergence status on the full gradient.
    let grad_norm = grad_full.norm();
    if grad_norm <= opts.tol_conv * (1.0 + value.abs()) {
        outcome = MinimizeOutcome::Converged;
    } else if outcome == MinimizeOutcome::Converged {
        outcome = MinimizeOutcome::Stalled;
    }
    MinimizeResult { outcome, x, value, grad_norm, iterations, action_trace: trace }
}

/// A converged, classified, certified solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub id: usize,
    pub loop_path: LoopPath,
    pub action: ActionBreakdown,
    pub grad_norm: f64,
    pub morse: MorseData,
    pub certification: Certification,
    /// Level band `[a_{k-1}, a_k)` the action falls in, when levels exist.
    pub band: Option<usize>,
    pub seed_id: usize,
    pub under_resolved: bool,
    pub estimates_ok: bool,
    /// Record stands for a whole circle orbit (quotient was applied).
    pub s1_orbit_representative: bool,
    pub cluster_size: usize,
}

/// Greedy clustering by the symmetry-quotient distance; records are
/// processed in ascending action order and the lowest-action member
/// represents each cluster.
pub fn dedupe(
    mut records: Vec<SolutionRecord>,
    quotient_time_shift: bool,
    dedupe_tol: f64,
) -> Vec<SolutionRecord> {
    records.sort_by(|a, b| {
        a.action
            .total
            .partial_cmp(&b.action.total)
            .unwrap()
            .then_with(|| {
                a.loop_path
                    .xbar()
                    .iter()
                    .zip(b.loop_path.xbar())
                    .map(|(x, y)| x.partial_cmp(y).unwrap())
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let mut reps: Vec<SolutionRecord> = Vec::new();
    'next: for rec in records {
        for rep in reps.iter_mut() {
            let d = distance_mod_symmetries(&rep.loop_path, &rec.loop_path, quotient_time_shift)
                .expect("records share a problem");
            let scale = 1.0 + rep.loop_path.norms().w12.max(rec.loop_path.norms().w12);
            if d <= dedupe_tol * scale {
                rep.cluster_size += 1;
                continue 'next;
            }
        }
        reps.push(rec);
    }
    for (i, rep) in reps.iter_mut().enumerate() {
        rep.id = i + 1;
    }
    reps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountingMode {
    /// Generic bound: `N + 1` forced, `N` unforced.
    Theorem1 { forced: bool },
    /// Level-ladder bound for feasible parameters and periods:
    /// `(N - N0 + 1) 2^N0` forced, `(N - N0) 2^N0` unforced.
    Theorem2 { forced: bool },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusReport {
    pub mode: CountingMode,
    pub bound: usize,
    /// Nondegenerate refinement of the generic bound, when one applies.
    pub nondegenerate_bound: Option<usize>,
    pub found: usize,
    pub meets_bound: bool,
    pub quotient_time_shift: bool,
    pub seeds_total: usize,
    pub converged_total: usize,
    pub certified_total: usize,
    pub records: Vec<SolutionRecord>,
    /// Count of records per level band `1..=n`, in Theorem-2 mode.
    pub band_counts: Option<Vec<usize>>,
    pub per_band_expected: Option<usize>,
    pub constants: ConstantsReport,
    /// The sign convention pinned by certification: the forcing couples
    /// with `+ f . q` in the action and appears as `+ f` on the right-hand
    /// side of the equations of motion.
    pub l3_sign: String,
}

/// Full pipeline: plan, minimize, classify, certify, dedupe, band and
/// compare against the applicable lower bound. Under-counting is reported
/// honestly, not treated as an error.
pub fn census(
    params: &PendulumParams,
    forcing: &Forcing,
    winding: &WindingVector,
    period: f64,
    k_trunc: usize,
    grid_m: usize,
    opts: &SolverOptions,
) -> Result<CensusReport> {
    let model = ActionModel::new(
        params.clone(),
        forcing.clone(),
        winding.clone(),
        period,
        k_trunc,
        grid_m,
    )?;
    let constants =
        bounds::constants_report(params, winding, forcing, period, opts.lambda_resolution);
    let seeds = seed_plan(&model, opts);
    let seeds_total = seeds.len();

    let run = |seed: &Seed| -> (usize, MinimizeResult) { (seed.id, minimize(&model, seed, opts)) };
    let results: Vec<(usize, MinimizeResult)> = if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            seeds.par_iter().map(run).collect()
        })
    } else {
        seeds.iter().map(run).collect()
    };

    let quotient = opts.quotient_time_shift.unwrap_or_else(|| forcing.is_zero());
    let mut converged_total = 0usize;
    let mut candidates = Vec::new();
    for (seed_id, res) in results {
        if res.outcome != MinimizeOutcome::Converged {
            continue;
        }
        converged_total += 1;
        debug_assert!(
            res.action_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())),
            "descent trace must be non-increasing"
        );
        let lp = model.unpack(&res.x);
        let x = model.pack(&lp);
        let action = model.breakdown(&x);
        let morse = match model.classify(&x) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let certification = certify(params, forcing, &lp, opts.certify_steps)?;
        if !certification.pass {
            continue;
        }
        let checks =
            bounds::estimate_oracles(params, forcing, &lp, constants.lambda_conservative)?;
        let estimates_ok = checks.iter().all(|c| c.holds);
        debug_assert!(estimates_ok, "estimate oracle failed on a certified solution");
        let band = constants.levels.as_ref().and_then(|lv| lv.band_of(action.total));
        candidates.push(SolutionRecord {
            id: 0,
            under_resolved: lp.spectral_tail_fraction() > TAIL_FLAG,
            loop_path: lp,
            action,
            grad_norm: res.grad_norm,
            morse,
            certification,
            band,
            seed_id,
            estimates_ok,
            s1_orbit_representative: quotient,
            cluster_size: 1,
        });
    }
    let certified_total = candidates.len();
    let records = dedupe(candidates, quotient, opts.dedupe_tol);

    let forced = !forcing.is_zero();
    let n = params.n();
    let n0 = winding.n0();
    // The level bound applies only where the whole ladder exists (feasible,
    // T in the window and outside its endpoint zones).
    let theorem2 = constants.levels.is_some() && n0 >= 1 && n0 <= n - 1;
    let (mode, bound, nondeg_bound, per_band_expected) = if theorem2 {
        let b = if forced { (n - n0 + 1) << n0 } else { (n - n0) << n0 };
        let per_band = if forced { n - n0 + 1 } else { n - n0 };
        (CountingMode::Theorem2 { forced }, b, None, Some(per_band))
    } else {
        let b = if forced { n + 1 } else { n };
        let nd = if forced { 1usize << n } else { 1usize << (n - 1) };
        (CountingMode::Theorem1 { forced }, b, Some(nd), None)
    };
    let band_counts = constants.levels.as_ref().map(|lv| {
        let nbands = lv.thresholds().len();
        let mut counts = vec![0usize; nbands];
        for r in &records {
            if let Some(b) = r.band {
                counts[b - 1] += 1;
            }
        }
        counts
    });

    let found = records.len();
    Ok(CensusReport {
        mode,
        bound,
        nondegenerate_bound: nondeg_bound,
        found,
        meets_bound: found >= bound,
        quotient_time_shift: quotient,
        seeds_total,
        converged_total,
        certified_total,
        records,
        band_counts,
        per_band_expected: if theorem2 { per_band_expected } else { None },
        constants,
        l3_sign: "+f.q".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopspace::validate_winding;
    use crate::model::Harmonic;
    use approx::assert_abs_diff_eq;

    fn n1_model(t_per: f64) -> ActionModel {
        let p = PendulumParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let w = validate_winding(&[1]).unwrap();
        ActionModel::new(p, Forcing::zero(1, t_per), w, t_per, 16, 128).unwrap()
    }

    fn quick_opts() -> SolverOptions {
        SolverOptions { density: 4, perturbations: 0, lambda_resolution: 32, ..Default::default() }
    }

    #[test]
    fn seed_plan_counts() {
        let model = n1_model(1.0);
        let opts = SolverOptions { density: 4, perturbations: 0, ..Default::default() };
        let seeds = seed_plan(&model, &opts);
        assert_eq!(seeds.len(), 4);
        assert!(seeds.iter().all(|s| s.loop_path.norms().l2_tilde == 0.0));

        let p = PendulumParams::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let w = validate_winding(&[1, 0]).unwrap();
        let model =
            ActionModel::new(p, Forcing::zero(2, 1.0), w.clone(), 1.0, 8, 64).unwrap();
        let opts = SolverOptions { density: 4, perturbations: 2, ..Default::default() };
        let seeds = seed_plan(&model, &opts);
        assert_eq!(seeds.len(), 2 * 4 * 3);
        // every start reconstructs with the problem winding
        for s in &seeds {
            assert_eq!(s.loop_path.winding(), &w);
        }
        // deterministic under the seed
        let again = seed_plan(&model, &opts);
        for (a, b) in seeds.iter().zip(&again) {
            assert_eq!(a.loop_path, b.loop_path);
        }
    }

    #[test]
    fn minimize_single_link_rotation() {
        let model = n1_model(1.0);
        let opts = quick_opts();
        let seeds = seed_plan(&model, &opts);
        let res = minimize(&model, &seeds[0], &opts);
        assert_eq!(res.outcome, MinimizeOutcome::Converged);
        assert!(res.grad_norm <= opts.tol_conv * (1.0 + res.value.abs()));
        // Bounded below by a0 = 2 pi^2 / T - T (unforced, unit data).
        let a0 = 2.0 * PI * PI - 1.0;
        assert!(res.value >= a0, "action {} below the floor {}", res.value, a0);
        // Monotone trace.
        for w in res.action_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn minimize_fixed_point_takes_no_iterations() {
        let model = n1_model(1.0);
        let opts = quick_opts();
        let seeds = seed_plan(&model, &opts);
        let res = minimize(&model, &seeds[0], &opts);
        let converged = Seed {
            id: 99,
            loop_path: model.unpack(&res.x),
            sine_mask: false,
        };
        let again = minimize(&model, &converged, &opts);
        assert_eq!(again.outcome, MinimizeOutcome::Converged);
        assert_eq!(again.iterations, 0);
        assert_abs_diff_eq!(again.value, res.value, epsilon = 1e-10);
    }

    #[test]
    fn single_link_hessian_has_the_circle_mode() {
        let model = n1_model(1.0);
        let mut opts = quick_opts();
        opts.tol_conv = 1e-11;
        let seeds = seed_plan(&model, &opts);
        let res = minimize(&model, &seeds[0], &opts);
        assert_eq!(res.outcome, MinimizeOutcome::Converged);
        let morse = model.classify(&res.x).unwrap();
        let smallest_abs =
            morse.eigenvalues.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        assert!(smallest_abs < 1e-6, "time-shift zero mode missing: {smallest_abs:.3e}");
        assert_eq!(morse.zero_modes, 1);
        assert!(morse.nondegenerate);

        // Symmetry defect of the finite-difference Hessian.
        let h = model.hessian_fd(&res.x).unwrap();
        let defect = (&h - h.transpose()).norm() / h.norm();
        assert!(defect < 1e-6, "symmetry defect {defect}");
        // Index 0 at the global minimizer.
        assert_eq!(morse.morse_index, 0);
    }

    #[test]
    fn census_single_link_meets_theorem_bound() {
        let p = PendulumParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let w = validate_winding(&[1]).unwrap();
        let f = Forcing::zero(1, 1.0);
        let opts = quick_opts();
        let report = census(&p, &f, &w, 1.0, 16, 128, &opts).unwrap();
        assert_eq!(report.mode, CountingMode::Theorem1 { forced: false });
        assert_eq!(report.bound, 1);
        assert!(report.meets_bound, "found {} of {}", report.found, report.bound);
        assert!(report.quotient_time_shift);
        for r in &report.records {
            assert!(r.certification.pass);
            assert!(r.estimates_ok);
            assert!(!r.under_resolved);
        }
    }

    #[test]
    fn dedupe_identifies_symmetric_copies() {
        let p = PendulumParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let w = validate_winding(&[1]).unwrap();
        let f = Forcing::zero(1, 1.0);
        let opts = quick_opts();
        let report = census(&p, &f, &w, 1.0, 16, 128, &opts).unwrap();
        let mut rec = report.records[0].clone();
        rec.cluster_size = 1;

        // A time-shifted copy collapses under the circle quotient and
        // stays distinct without it.
        let mut shifted = rec.clone();
        shifted.loop_path = rec.loop_path.time_shift(0.31);
        let merged = dedupe(vec![rec.clone(), shifted.clone()], true, 1e-4);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].cluster_size, 2);
        let kept = dedupe(vec![rec.clone(), shifted], false, 1e-4);
        assert_eq!(kept.len(), 2);

        // A mean shifted by 2 pi is the same record either way.
        let copy = rec.clone();
        let merged = dedupe(vec![rec, copy], false, 1e-4);
        assert_eq!(merged.len(), 1);
    }

    #[test]
    fn sine_masked_seed_reaches_a_saddle() {
        // Two links, odd forcing: the corner seeds converge inside the
        // sine locus, and the full gradient still vanishes there.
        let p = PendulumParams::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let w = validate_winding(&[1, 0]).unwrap();
        let f = Forcing::new(
            1.0,
            vec![vec![Harmonic { k: 1, cos_amp: 0.0, sin_amp: 0.1 }], vec![]],
        )
        .unwrap();
        let model = ActionModel::new(p, f, w.clone(), 1.0, 16, 128).unwrap();
        let opts = SolverOptions::default();
        // Corner with the pendant link upright: a saddle of the action.
        let seed = Seed {
            id: 0,
            loop_path: LoopPath::constant(1.0, w, vec![0.0, 0.0], 16).unwrap(),
            sine_mask: true,
        };
        let res = minimize(&model, &seed, &opts);
        assert_eq!(res.outcome, MinimizeOutcome::Converged);
        let lp = model.unpack(&res.x);
        // The mean stayed at the corner.
        assert_abs_diff_eq!(lp.xbar()[1], 0.0, epsilon = 1e-9);
        // And this is a saddle, not a minimum.
        let morse = model.classify(&res.x).unwrap();
        assert!(morse.morse_index >= 1, "expected a saddle, index 0");
    }
}
