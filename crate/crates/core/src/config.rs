//! Flat key-value configuration (TOML sections) for the CLI pipeline.

use crate::error::{Error, Result};
use crate::loopspace::{validate_winding, WindingVector};
use crate::model::{Forcing, Harmonic, PendulumParams};
use crate::solver::SolverOptions;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub pendulum: PendulumSection,
    pub problem: ProblemSection,
    /// Per-coordinate harmonic triples `(k, cos_amp, sin_amp)` under keys
    /// `f1 .. fN`; coordinates without a key are unforced.
    #[serde(default)]
    pub forcing: BTreeMap<String, Vec<(u32, f64, f64)>>,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendulumSection {
    pub n: usize,
    pub m: Vec<f64>,
    pub l: Vec<f64>,
    #[serde(default = "default_gravity")]
    pub g: f64,
}

fn default_gravity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSection {
    pub v: Vec<i64>,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    /// Quadrature grid; defaults to `8 K`.
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
}

fn default_k() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub density: usize,
    pub r: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub dedupe_tol: f64,
    pub threads: usize,
    pub lambda_resolution: usize,
    pub certify_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            density: o.density,
            r: o.perturbations,
            seed: o.seed,
            tol: o.tol_conv,
            max_iters: o.max_iters,
            dedupe_tol: o.dedupe_tol,
            threads: o.threads,
            lambda_resolution: o.lambda_resolution,
            certify_steps: o.certify_steps,
        }
    }
}

/// Validated runtime problem assembled from a config file.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: PendulumParams,
    pub winding: WindingVector,
    pub forcing: Forcing,
    pub period: f64,
    pub k_trunc: usize,
    pub grid_m: usize,
    pub solver: SolverOptions,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn build(&self) -> Result<Problem> {
        let p = &self.pendulum;
        if p.m.len() != p.n || p.l.len() != p.n {
            return Err(Error::Config(format!(
                "pendulum.n = {} but m has {} and l has {} entries",
                p.n,
                p.m.len(),
                p.l.len()
            )));
        }
        let params = PendulumParams::new(p.m.clone(), p.l.clone(), p.g)?;
        if self.problem.v.len() != p.n {
            return Err(Error::Config(format!(
                "problem.v has {} entries for n = {}",
                self.problem.v.len(),
                p.n
            )));
        }
        let winding = validate_winding(&self.problem.v)?;
        let mut components = vec![Vec::new(); p.n];
        for (key, triples) in &self.forcing {
            let idx: usize = key
                .strip_prefix('f')
                .and_then(|s| s.parse().ok())
                .filter(|&i| i >= 1 && i <= p.n)
                .ok_or_else(|| {
                    Error::Config(format!("forcing key '{key}' is not one of f1..f{}", p.n))
                })?;
            components[idx - 1] = triples
                .iter()
                .map(|&(k, c, s)| Harmonic { k, cos_amp: c, sin_amp: s })
                .collect();
        }
        let forcing = Forcing::new(self.problem.period, components)?;
        let k_trunc = self.problem.k;
        let grid_m = self.problem.m.unwrap_or(8 * k_trunc);
        let s = &self.solver;
        let solver = SolverOptions {
            density: s.density,
            perturbations: s.r,
            seed: s.seed,
            tol_conv: s.tol,
            max_iters: s.max_iters,
            dedupe_tol: s.dedupe_tol,
            threads: s.threads,
            lambda_resolution: s.lambda_resolution,
            certify_steps: s.certify_steps,
            quotient_time_shift: None,
        };
        Ok(Problem {
            params,
            winding,
            forcing,
            period: self.problem.period,
            k_trunc,
            grid_m,
            solver,
        })
    }

    /// Assemble a ready-to-run config from found parameters.
    pub fn from_parts(
        params: &PendulumParams,
        v: &[i64],
        period: f64,
        forcing: &Forcing,
    ) -> Self {
        let mut forcing_map = BTreeMap::new();
        for (i, comp) in forcing.components().iter().enumerate() {
            if !comp.is_empty() {
                forcing_map.insert(
                    format!("f{}", i + 1),
                    comp.iter().map(|h| (h.k, h.cos_amp, h.sin_amp)).collect(),
                );
            }
        }
        Self {
            pendulum: PendulumSection {
                n: params.n(),
                m: params.masses().to_vec(),
                l: params.lengths().to_vec(),
                g: params.gravity(),
            },
            problem: ProblemSection {
                v: v.to_vec(),
                period,
                k: default_k(),
                m: None,
            },
            forcing: forcing_map,
            solver: SolverSection::default(),
        }
    }
}
