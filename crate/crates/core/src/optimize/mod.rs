//! Derivative-free minimization over periodic parameter boxes.
//!
//! Two strategies: a uniform grid seeding multistart Nelder–Mead, and an
//! elitist genetic search followed by a simplex polish. Both are
//! deterministic for a fixed seed regardless of thread count.

pub mod genetic;
pub mod nelder_mead;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use genetic::{genetic, GeneticOutcome, GeneticParams};
pub use nelder_mead::{nelder_mead, SimplexOutcome};
use nelder_mead::lex_cmp;

/// Box `[lower, upper)` with every coordinate periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(u > l)) {
            return Err(Error::InvalidParameter("empty or mismatched domain".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 2π)^d`.
    pub fn angles(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![TAU; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn period(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            let p = self.period(k);
            let mut w = self.lower[k] + (*v - self.lower[k]).rem_euclid(p);
            if w >= self.upper[k] {
                w = self.lower[k];
            }
            *v = w;
        }
    }

    /// Shifts each coordinate of `x` by whole periods to lie within half a period of `anchor`.
    pub fn unwrap_near(&self, x: &[f64], anchor: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(anchor)
            .enumerate()
            .map(|(k, (&v, &a))| {
                let p = self.period(k);
                v - p * ((v - a) / p).round()
            })
            .collect()
    }

    /// Euclidean distance with periodic coordinates.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let u = self.unwrap_near(a, b);
        u.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.lower[k] + rng.random::<f64>() * self.period(k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GridSimplex,
    Genetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub strategy: Strategy,
    pub grid_points: usize,
    pub max_grid_points: usize,
    pub restarts: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub population: usize,
    pub elite: usize,
    pub mutation_sigma: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::GridSimplex,
            grid_points: 32,
            max_grid_points: 4096,
            restarts: 8,
            tolerance: 1e-6,
            max_iterations: 4000,
            population: 64,
            elite: 8,
            mutation_sigma: 0.1,
            generations: 200,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn genetic(seed: u64) -> Self {
        Self {
            strategy: Strategy::Genetic,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 || self.grid_points == 0 || self.max_grid_points == 0 {
            return Err(Error::InvalidParameter("budget must be > 0".into()));
        }
        if self.strategy == Strategy::Genetic && (self.population <= self.elite || self.generations == 0) {
            return Err(Error::InvalidParameter("population must exceed elite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartResult {
    pub start: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best point among the initial samples (grid or first GA population).
    pub sampled_x: Vec<f64>,
    pub sampled_value: f64,
    pub restarts: Vec<RestartResult>,
    /// Best-so-far value after each stage.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Initial sample points: the lattice `lower + i·period/grid_points` in every
/// coordinate, or a seeded uniform sample when the lattice would exceed
/// `max_grid_points`.
pub fn initial_samples(domain: &Domain, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let g = cfg.grid_points;
    let full = (g as f64).powi(d as i32);
    if full <= cfg.max_grid_points as f64 {
        let total = g.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|k| {
                        let i = idx % g;
                        idx /= g;
                        domain.lower[k] + domain.period(k) * i as f64 / g as f64
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        (0..cfg.max_grid_points).map(|_| domain.sample(&mut rng)).collect()
    }
}

fn better(a: (&[f64], f64), b: (&[f64], f64)) -> bool {
    a.1.total_cmp(&b.1).then_with(|| lex_cmp(a.0, b.0)) == std::cmp::Ordering::Less
}

/// Minimizes a periodic objective over `domain`.
pub fn minimize<F>(f: &F, domain: &Domain, cfg: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    cfg.validate()?;
    let d = domain.dim();
    if d == 0 {
        let v = f(&[]);
        return Ok(OptimizeResult {
            x: vec![],
            value: v,
            sampled_x: vec![],
            sampled_value: v,
            restarts: vec![],
            trace: vec![v],
            evaluations: 1,
            converged: true,
        });
    }
    match cfg.strategy {
        Strategy::GridSimplex => grid_simplex(f, domain, cfg),
        Strategy::Genetic => genetic_polish(f, domain, cfg),
    }
}

fn grid_simplex<F>(f: &F, domain: &Domain, cfg: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let samples = initial_samples(domain, cfg);
    let mut scored: Vec<(Vec<f64>, f64)> = samples
        .into_par_iter()
        .map(|x| {
            let v = f(&x);
            (x, if v.is_nan() { f64::INFINITY } else { v })
        })
        .collect();
    let evaluations = scored.len();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
    let (sampled_x, sampled_value) = scored[0].clone();

    let step = (0..domain.dim())
        .map(|k| domain.period(k))
        .fold(f64::INFINITY, f64::min)
        / (cfg.grid_points as f64).min((cfg.max_grid_points as f64).powf(1.0 / domain.dim() as f64));
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for (x, _) in &scored {
        if starts.len() >= cfg.restarts {
            break;
        }
        if starts.iter().all(|s| domain.distance(s, x) > 0.5 * step) {
            starts.push(x.clone());
        }
    }
    let restarts: Vec<RestartResult> = starts
        .into_par_iter()
        .map(|s| {
            let out = nelder_mead(f, domain, &s, step, cfg.tolerance, cfg.max_iterations);
            RestartResult {
                start: s,
                x: out.x,
                value: out.value,
                iterations: out.iterations,
                converged: out.converged,
            }
        })
        .collect();
    Ok(assemble(sampled_x, sampled_value, restarts, evaluations, vec![sampled_value]))
}

fn genetic_polish<F>(f: &F, domain: &Domain, cfg: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let params = GeneticParams {
        population: cfg.population,
        elite: cfg.elite,
        sigma: cfg.mutation_sigma,
        generations: cfg.generations,
    };
    let mut origin = vec![0.0; domain.dim()];
    domain.wrap(&mut origin);
    let origin_value = f(&origin);
    let ga = genetic(f, domain, &params, cfg.seed, std::slice::from_ref(&origin));

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for (x, _) in &ga.population {
        if starts.len() >= cfg.restarts.max(1) {
            break;
        }
        if starts.iter().all(|s| domain.distance(s, x) > cfg.mutation_sigma) {
            starts.push(x.clone());
        }
    }
    let polished: Vec<(RestartResult, usize)> = starts
        .into_par_iter()
        .map(|s| polish(f, domain, &s, cfg))
        .collect();
    let evaluations = ga.evaluations + 1 + polished.iter().map(|p| p.1).sum::<usize>();
    let restarts = polished.into_iter().map(|p| p.0).collect();
    let mut trace = vec![origin_value];
    trace.extend(&ga.history);
    let (sampled_x, sampled_value) = if better((&ga.x, ga.value), (&origin, origin_value)) {
        (ga.x.clone(), ga.value)
    } else {
        (origin, origin_value)
    };
    Ok(assemble(sampled_x, sampled_value, restarts, evaluations, trace))
}

/// Nelder–Mead restarted from its own result until it stops improving.
fn polish<F>(f: &F, domain: &Domain, start: &[f64], cfg: &OptimizerConfig) -> (RestartResult, usize)
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let mut x = start.to_vec();
    let mut value = f64::INFINITY;
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = false;
    let mut step = cfg.mutation_sigma.max(1e-3);
    for _ in 0..6 {
        let out = nelder_mead(f, domain, &x, step, cfg.tolerance, cfg.max_iterations);
        iterations += out.iterations;
        evaluations += out.evaluations;
        let gain = value - out.value;
        converged = out.converged;
        if out.value < value {
            x = out.x;
            value = out.value;
        }
        if gain.is_finite() && gain <= cfg.tolerance {
            break;
        }
        step = (step * 0.5).max(1e-3);
    }
    (
        RestartResult {
            start: start.to_vec(),
            x,
            value,
            iterations,
            converged,
        },
        evaluations,
    )
}

fn assemble(
    sampled_x: Vec<f64>,
    sampled_value: f64,
    restarts: Vec<RestartResult>,
    evaluations: usize,
    mut trace: Vec<f64>,
) -> OptimizeResult {
    let mut best = (sampled_x.clone(), sampled_value);
    for r in &restarts {
        if better((&r.x, r.value), (&best.0, best.1)) {
            best = (r.x.clone(), r.value);
        }
    }
    let last = trace.last().copied().unwrap_or(f64::INFINITY);
    trace.push(best.1.min(last));
    for i in 1..trace.len() {
        trace[i] = trace[i].min(trace[i - 1]);
    }
    let converged = restarts.iter().any(|r| r.converged) || restarts.is_empty();
    OptimizeResult {
        x: best.0,
        value: best.1,
        sampled_x,
        sampled_value,
        restarts,
        trace,
        evaluations,
        converged,
    }
}
