//! Subtorus combinatorics: binary codes, seed points, constraint sets built
//! from coordinate pins at 0 or pi, membership, sampling, and the separable
//! potential-bound certificates.
//!
//! Constraint sets are boolean formulas over pin atoms. The abstract
//! constructors pin the first `N0` coordinates; `transport` carries a set
//! through the coordinate permutation onto the actual zero-winding block.

use crate::bounds::beta_of_k;
use crate::error::{Error, Result};
use crate::model::PendulumParams;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

/// Angular tolerance for membership; pins are exact by construction, so
/// this only absorbs float noise.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Binary expansion `k - 1 = sum tau_i 2^(N0 - i)` (big-endian bits).
pub fn tau(k: usize, n0: usize) -> Result<Vec<u8>> {
    if n0 == 0 || n0 >= usize::BITS as usize || k == 0 || k > (1usize << n0) {
        return Err(Error::InvalidParameter(format!("k = {k} out of range for N0 = {n0}")));
    }
    Ok((1..=n0).map(|i| ((k - 1) >> (n0 - i) & 1) as u8).collect())
}

/// Reconstruct `k` from its bits; inverse of [`tau`].
pub fn tau_inverse(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize) + 1
}

/// Seed point `z(k)` with coordinates `pi (1 - tau_i(k))` in `{0, pi}`.
pub fn z_point(k: usize, n0: usize) -> Result<Vec<f64>> {
    Ok(tau(k, n0)?.iter().map(|&b| PI * (1.0 - b as f64)).collect())
}

/// A coordinate pinned to one of the two symmetric angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PinValue {
    Zero,
    Pi,
}

impl PinValue {
    pub fn angle(self) -> f64 {
        match self {
            PinValue::Zero => 0.0,
            PinValue::Pi => PI,
        }
    }

    fn from_bit(b: u8) -> Self {
        if b == 1 {
            PinValue::Pi
        } else {
            PinValue::Zero
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formula {
    /// The whole torus.
    True,
    Atom { coord: usize, value: PinValue },
    AnyOf(Vec<Formula>),
    AllOf(Vec<Formula>),
}

/// A subset of the N-torus described by a pin formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    n: usize,
    formula: Formula,
}

/// One DNF term: a consistent assignment of pinned coordinates.
pub type PinTerm = BTreeMap<usize, PinValue>;

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl ConstraintSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// `S_k`: all `N0` lead coordinates pinned to `z(k)`.
    pub fn s_k(n: usize, n0: usize, k: usize) -> Result<Self> {
        let bits = tau(k, n0)?;
        let atoms = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| Formula::Atom { coord: i, value: PinValue::from_bit(1 - b) })
            .collect();
        Ok(Self { n, formula: Formula::AllOf(atoms) })
    }

    /// `T_{k,j}`: the pins of `S_k` with bit `m` released, where
    /// `k - j = 2^(N0 - m)`. Contains both `S_k` and `S_j`.
    pub fn t_pair(n: usize, n0: usize, k: usize, j: usize) -> Result<Self> {
        if j == 0 || j >= k {
            return Err(Error::InvalidParameter(format!("need 1 <= j < k (got j={j}, k={k})")));
        }
        let diff = k - j;
        if !diff.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("k - j = {diff} is not a power of two")));
        }
        let m = n0 - diff.trailing_zeros() as usize;
        let bits = tau(k, n0)?;
        if bits[m - 1] != 1 {
            return Err(Error::InvalidParameter(format!(
                "bit {m} of k = {k} is 0; tau(k) and tau(j) differ in more than one bit"
            )));
        }
        let atoms = bits
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m - 1)
            .map(|(i, &b)| Formula::Atom { coord: i, value: PinValue::from_bit(1 - b) })
            .collect();
        Ok(Self { n, formula: Formula::AllOf(atoms) })
    }

    /// Codimension-one torus `{ y_i = pi tau_i(k) }` (note the reflected
    /// pin: `z_i(1 - tau_i(k))`).
    pub fn t_hyperplane(n: usize, n0: usize, k: usize, i: usize) -> Result<Self> {
        let bits = tau(k, n0)?;
        if i == 0 || i > n0 {
            return Err(Error::InvalidParameter(format!("coordinate {i} out of 1..={n0}")));
        }
        Ok(Self {
            n,
            formula: Formula::Atom { coord: i - 1, value: PinValue::from_bit(bits[i - 1]) },
        })
    }

    /// `Q_k`: union of the `N0` hyperplanes at level `k`.
    pub fn q_k(n: usize, n0: usize, k: usize) -> Result<Self> {
        let parts = (1..=n0)
            .map(|i| Ok(Self::t_hyperplane(n, n0, k, i)?.formula))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, formula: Formula::AnyOf(parts) })
    }

    /// `M_k = intersection of Q_j for j = k..=2^N0`.
    pub fn m_k(n: usize, n0: usize, k: usize) -> Result<Self> {
        let last = 1usize << n0;
        if k == 0 || k > last {
            return Err(Error::InvalidParameter(format!("k = {k} out of range")));
        }
        let parts = (k..=last)
            .map(|j| Ok(Self::q_k(n, n0, j)?.formula))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, formula: Formula::AllOf(parts) })
    }

    /// `O_k`: coordinates with `tau_i(k) = 1` pinned to 0, the rest free.
    pub fn o_k(n: usize, n0: usize, k: usize) -> Result<Self> {
        let bits = tau(k, n0)?;
        let atoms = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| Formula::Atom { coord: i, value: PinValue::Zero })
            .collect::<Vec<_>>();
        Ok(Self {
            n,
            formula: if atoms.is_empty() { Formula::True } else { Formula::AllOf(atoms) },
        })
    }

    /// Image under the inverse coordinate permutation: abstract coordinate
    /// `i` becomes `sigma[i]`.
    pub fn transport(&self, sigma: &[usize]) -> Result<Self> {
        fn map(f: &Formula, sigma: &[usize], n: usize) -> Result<Formula> {
            Ok(match f {
                Formula::True => Formula::True,
                Formula::Atom { coord, value } => {
                    let mapped = *sigma.get(*coord).ok_or_else(|| {
                        Error::InvalidParameter(format!("sigma does not cover coordinate {coord}"))
                    })?;
                    if mapped >= n {
                        return Err(Error::InvalidParameter(format!(
                            "sigma({coord}) = {mapped} outside the torus"
                        )));
                    }
                    Formula::Atom { coord: mapped, value: *value }
                }
                Formula::AnyOf(fs) => {
                    Formula::AnyOf(fs.iter().map(|g| map(g, sigma, n)).collect::<Result<_>>()?)
                }
                Formula::AllOf(fs) => {
                    Formula::AllOf(fs.iter().map(|g| map(g, sigma, n)).collect::<Result<_>>()?)
                }
            })
        }
        Ok(Self { n: self.n, formula: map(&self.formula, sigma, self.n)? })
    }

    /// Evaluate the formula with angular distance at most `tol` per atom.
    pub fn membership(&self, point: &[f64], tol: f64) -> bool {
        fn eval(f: &Formula, point: &[f64], tol: f64) -> bool {
            match f {
                Formula::True => true,
                Formula::Atom { coord, value } => {
                    angular_distance(point[*coord], value.angle()) <= tol
                }
                Formula::AnyOf(fs) => fs.iter().any(|g| eval(g, point, tol)),
                Formula::AllOf(fs) => fs.iter().all(|g| eval(g, point, tol)),
            }
        }
        eval(&self.formula, point, tol)
    }

    /// Disjunctive normal form: deduplicated consistent pin assignments,
    /// with terms subsumed by a weaker term removed. Intersections are
    /// expanded incrementally so the term count stays bounded by `3^N0`.
    /// An unsatisfiable formula yields no terms.
    pub fn dnf(&self) -> Vec<PinTerm> {
        fn expand(f: &Formula) -> Vec<PinTerm> {
            match f {
                Formula::True => vec![PinTerm::new()],
                Formula::Atom { coord, value } => {
                    vec![[(*coord, *value)].into_iter().collect()]
                }
                Formula::AnyOf(fs) => {
                    let mut out = Vec::new();
                    for g in fs {
                        out.extend(expand(g));
                    }
                    normalize(out)
                }
                Formula::AllOf(fs) => {
                    let mut acc = vec![PinTerm::new()];
                    for g in fs {
                        let rhs = expand(g);
                        let mut next = Vec::new();
                        for a in &acc {
                            'term: for b in &rhs {
                                let mut merged = a.clone();
                                for (&c, &v) in b {
                                    match merged.get(&c) {
                                        Some(&u) if u != v => continue 'term,
                                        _ => {
                                            merged.insert(c, v);
                                        }
                                    }
                                }
                                next.push(merged);
                            }
                        }
                        acc = normalize(next);
                    }
                    acc
                }
            }
        }

        fn normalize(mut terms: Vec<PinTerm>) -> Vec<PinTerm> {
            terms.sort();
            terms.dedup();
            // Drop terms that refine another term (their set is contained).
            let keep: Vec<bool> = terms
                .iter()
                .map(|t| {
                    !terms.iter().any(|u| {
                        u != t && u.len() < t.len() && u.iter().all(|(c, v)| t.get(c) == Some(v))
                    })
                })
                .collect();
            terms
                .into_iter()
                .zip(keep)
                .filter_map(|(t, k)| k.then_some(t))
                .collect()
        }

        expand(&self.formula)
    }

    /// Draw points uniformly: a random DNF term pins its coordinates, free
    /// coordinates are uniform on the circle. Every sample passes
    /// [`membership`](Self::membership) at `1e-12`.
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let terms = self.dnf();
        if terms.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let term = &terms[rng.random_range(0..terms.len())];
            let mut point: Vec<f64> = (0..self.n).map(|_| rng.random_range(0.0..TAU)).collect();
            for (&c, &v) in term {
                point[c] = v.angle();
            }
            debug_assert!(self.membership(&point, 1e-12));
            out.push(point);
        }
        Ok(out)
    }
}

/// Certificate that the averaged potential separates the level sets:
/// `max V0 over M_{k+1} <= beta(k)` and `min V0 over O_{k+1} >= beta(k+1)`,
/// where `V0(x) = sum_{i in I0} g beta_i cos(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub k: usize,
    pub beta_k: f64,
    pub beta_k1: f64,
    pub max_v_on_m: f64,
    pub min_v_on_o: f64,
    pub grid_checked: bool,
}

fn v0(params: &PendulumParams, sigma: &[usize], point: &[f64]) -> f64 {
    sigma.iter().map(|&c| params.gravity_beta(c) * point[c].cos()).sum()
}

/// Separable extremum of `V0` over one DNF term: pinned block coordinates
/// contribute `+-(g beta)`, free block coordinates their extreme value.
fn v0_extreme(params: &PendulumParams, sigma: &[usize], term: &PinTerm, maximize: bool) -> f64 {
    sigma
        .iter()
        .map(|&c| {
            let gb = params.gravity_beta(c);
            match term.get(&c) {
                Some(v) => gb * v.angle().cos(),
                None => {
                    if maximize {
                        gb
                    } else {
                        -gb
                    }
                }
            }
        })
        .sum()
}

/// Exact separable maximization plus a dense-grid cross-check.
///
/// Requires a feasible block: the coefficients `g beta_{sigma(i)}` must be
/// dominant (each exceeding the sum of its successors, equivalently
/// `gamma > 0`), which is what the level separation rests on.
pub fn potential_bounds_certificate(
    params: &PendulumParams,
    sigma: &[usize],
    k: usize,
    grid_resolution: usize,
) -> Result<CertificateReport> {
    let n0 = sigma.len();
    let n = params.n();
    let last = 1usize << n0;
    if k == 0 || k >= last {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..{last}")));
    }
    let gamma = crate::bounds::gamma_gap(params, sigma)?;
    if gamma <= 0.0 {
        return Err(Error::Infeasible(format!(
            "block coefficients are not dominant (gamma = {gamma:.6} <= 0)"
        )));
    }
    let beta_k = beta_of_k(params, sigma, k)?;
    let beta_k1 = beta_of_k(params, sigma, k + 1)?;

    let m_set = ConstraintSet::m_k(n, n0, k + 1)?.transport(sigma)?;
    let o_set = ConstraintSet::o_k(n, n0, k + 1)?.transport(sigma)?;

    let max_v_on_m = m_set
        .dnf()
        .iter()
        .map(|t| v0_extreme(params, sigma, t, true))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_v_on_o = o_set
        .dnf()
        .iter()
        .map(|t| v0_extreme(params, sigma, t, false))
        .fold(f64::INFINITY, f64::min);

    let scale = 1.0 + beta_k.abs() + beta_k1.abs();
    let tol = 1e-9 * scale;
    if max_v_on_m > beta_k + tol {
        return Err(Error::CertificateViolation(format!(
            "max V0 on M_{} = {max_v_on_m} exceeds beta({k}) = {beta_k}",
            k + 1
        )));
    }
    if min_v_on_o < beta_k1 - tol {
        return Err(Error::CertificateViolation(format!(
            "min V0 on O_{} = {min_v_on_o} below beta({}) = {beta_k1}",
            k + 1,
            k + 1
        )));
    }

    // Cross-check on a dense grid of the block coordinates restricted to
    // each set: grid the free coordinates of every DNF term.
    let mut grid_checked = true;
    let res = grid_resolution.max(4);
    for (set, bound, upper) in
        [(&m_set, beta_k, true), (&o_set, beta_k1, false)]
    {
        for term in set.dnf() {
            let free: Vec<usize> =
                sigma.iter().copied().filter(|c| !term.contains_key(c)).collect();
            let combos = res.pow(free.len() as u32);
            for idx in 0..combos {
                let mut point = vec![0.0; n];
                for (&c, &v) in &term {
                    point[c] = v.angle();
                }
                let mut rem = idx;
                for &c in &free {
                    point[c] = TAU * (rem % res) as f64 / res as f64;
                    rem /= res;
                }
                let v = v0(params, sigma, &point);
                let ok = if upper { v <= bound + tol } else { v >= bound - tol };
                if !ok {
                    grid_checked = false;
                }
            }
        }
    }
    if !grid_checked {
        return Err(Error::CertificateViolation(format!(
            "dense-grid cross-check failed at k = {k}"
        )));
    }
    Ok(CertificateReport { k, beta_k, beta_k1, max_v_on_m, min_v_on_o, grid_checked })
}
