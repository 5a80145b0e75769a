//! Elitist real-coded genetic search on a periodic box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::nelder_mead::lex_cmp;
use super::Domain;

#[derive(Debug, Clone)]
pub struct GeneticOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Final population sorted by value.
    pub population: Vec<(Vec<f64>, f64)>,
    /// Best value after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GeneticParams {
    pub population: usize,
    pub elite: usize,
    pub sigma: f64,
    pub generations: usize,
}

pub fn genetic<F>(f: &F, domain: &Domain, params: &GeneticParams, seed: u64, seeds: &[Vec<f64>]) -> GeneticOutcome
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let d = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, params.sigma).expect("positive sigma");
    let pop_size = params.population.max(params.elite + 2);

    let mut population: Vec<Vec<f64>> = seeds.iter().take(pop_size).cloned().collect();
    while population.len() < pop_size {
        population.push(domain.sample(&mut rng));
    }
    let score = |pop: Vec<Vec<f64>>| -> Vec<(Vec<f64>, f64)> {
        let mut scored: Vec<(Vec<f64>, f64)> = pop
            .into_par_iter()
            .map(|mut x| {
                domain.wrap(&mut x);
                let v = f(&x);
                (x, if v.is_nan() { f64::INFINITY } else { v })
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
        scored
    };

    let mut scored = score(population);
    let mut evaluations = pop_size;
    let mut history = Vec::with_capacity(params.generations);
    for _ in 0..params.generations {
        let mut next: Vec<Vec<f64>> = scored[..params.elite].iter().map(|(x, _)| x.clone()).collect();
        while next.len() < pop_size {
            let a = tournament(&scored, &mut rng);
            let b = tournament(&scored, &mut rng);
            let anchor = &scored[a].0;
            let other = domain.unwrap_near(&scored[b].0, anchor);
            let child: Vec<f64> = (0..d)
                .map(|k| {
                    let w: f64 = rng.random();
                    w * anchor[k] + (1.0 - w) * other[k] + normal.sample(&mut rng)
                })
                .collect();
            next.push(child);
        }
        let fresh = score(next.split_off(params.elite));
        evaluations += fresh.len();
        let mut merged: Vec<(Vec<f64>, f64)> = scored.drain(..params.elite).collect();
        merged.extend(fresh);
        merged.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
        scored = merged;
        history.push(scored[0].1);
    }
    let (x, value) = scored[0].clone();
    GeneticOutcome {
        x,
        value,
        population: scored,
        history,
        evaluations,
    }
}

fn tournament(scored: &[(Vec<f64>, f64)], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..scored.len());
    let b = rng.random_range(0..scored.len());
    a.min(b)
}
