//! Classical Fisher information of homodyne distributions: exact derivatives
//! of the gridded pdf, and Hellinger-distance fits on pdfs or histograms.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marginal::{
    displacement_shifts, ensemble_density, ensemble_marginal, evolve_ensemble, shift_probs, wavefunctions,
    GridDistribution, MeasurementSetting, MASS_TOLERANCE,
};
use super::sampling::{sample_stream, HomodyneDataset};
use crate::error::{Error, Result};
use crate::fock::{apply_generators, to_ensemble, QuantumState};
use crate::generators::GeneratorSet;
use crate::witness::P_FLOOR;

/// Cells with probability below this are left out of Fisher sums.
pub const CELL_FLOOR: f64 = 1e-16;
/// Largest accepted condition number of the quadratic-fit design.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FisherMethod {
    Analytic,
    Hellinger,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
    pub phi: Vec<f64>,
    pub method: FisherMethod,
    /// Per-entry standard errors, when estimated from samples.
    pub std_error: Option<DMatrix<f64>>,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Smallest eigenvalue of the symmetrized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let s = (&self.values + self.values.transpose()) * 0.5;
        s.symmetric_eigenvalues().min()
    }
}

/// Fisher matrix of `state` for every generator of `gens` in `setting`, from
/// `∂_i p(x) = 2 Σ_k w_k Im(ψ_k(x)* (Ĥ_i ψ_k)(x))` on the grid.
pub fn analytic_fisher(state: &QuantumState, gens: &GeneratorSet, setting: &MeasurementSetting) -> Result<FisherMatrix> {
    if state.modes() != setting.modes() || state.modes() != gens.modes() {
        return Err(Error::DimensionMismatch {
            expected: gens.modes(),
            got: setting.modes(),
        });
    }
    let ens = to_ensemble(state, P_FLOOR)?;
    let monomials: Vec<&[u8]> = gens.generators().iter().map(|g| g.exponents()).collect();
    let applied = apply_generators(&ens, &monomials)?;
    let ext = applied.engine.extended().clone();
    let n = gens.len();
    let cells = setting.cells();
    let vol = setting.cell_volume();

    let (p, dp) = (0..applied.psi.len())
        .into_par_iter()
        .fold(
            || (vec![0.0; cells], vec![vec![0.0; cells]; n]),
            |(mut p, mut dp), k| {
                let w = applied.weights[k];
                let mut vecs = vec![applied.psi[k].clone()];
                vecs.extend((0..n).map(|i| applied.h[i][k].clone()));
                let wf = wavefunctions(&ext, &vecs, setting);
                for (c, a) in wf[0].iter().enumerate() {
                    p[c] += w * a.norm_sqr() * vol;
                }
                for i in 0..n {
                    for (c, (a, b)) in wf[0].iter().zip(&wf[i + 1]).enumerate() {
                        dp[i][c] += 2.0 * w * (a.conj() * b).im * vol;
                    }
                }
                (p, dp)
            },
        )
        .reduce(
            || (vec![0.0; cells], vec![vec![0.0; cells]; n]),
            |(mut p1, mut d1), (p2, d2)| {
                p1.iter_mut().zip(&p2).for_each(|(a, b)| *a += b);
                for (x, y) in d1.iter_mut().zip(&d2) {
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                }
                (p1, d1)
            },
        );
    let defect = 1.0 - p.iter().sum::<f64>();
    if defect > MASS_TOLERANCE {
        return Err(Error::GridTooSmall(defect));
    }
    let live: Vec<usize> = (0..cells).filter(|&c| p[c] > CELL_FLOOR).collect();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let f: f64 = live.iter().map(|&c| dp[i][c] * dp[j][c] / p[c]).sum();
            values[(i, j)] = f;
            values[(j, i)] = f;
        }
    }
    Ok(FisherMatrix {
        labels: gens.labels(),
        values,
        phi: setting.phi.clone(),
        method: FisherMethod::Analytic,
        std_error: None,
    })
}

/// `d_H² = ½ Σ (√a − √b)²`, so that `d_H²(κ) ≈ κᵀ F κ / 8`.
pub fn hellinger_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x.max(0.0).sqrt() - y.max(0.0).sqrt()).powi(2)).sum::<f64>()
}

/// Parameter magnitudes probed along each direction, each used with both signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSchedule {
    pub steps: Vec<f64>,
    /// Also fit a `κ⁴` term, absorbing the leading finite-step bias.
    #[serde(default)]
    pub quartic: bool,
}

impl Default for KappaSchedule {
    fn default() -> Self {
        Self {
            steps: vec![0.05, 0.1, 0.15],
            quartic: true,
        }
    }
}

impl KappaSchedule {
    pub fn quadratic(steps: Vec<f64>) -> Self {
        Self { steps, quartic: false }
    }

    pub fn quartic(steps: Vec<f64>) -> Self {
        Self { steps, quartic: true }
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.steps.iter().flat_map(|&k| [-k, k]).collect()
    }
}

/// Least-squares fit `d² ≈ a + b κ²`; returns `(a, b)`.
pub fn fit_quadratic(kappas: &[f64], d2: &[f64]) -> Result<(f64, f64)> {
    let beta = fit_even_polynomial(kappas, d2, 1)?;
    Ok((beta[0], beta[1]))
}

/// Least-squares fit `d² ≈ Σ_{k≤degree} c_k κ^{2k}`; returns `c`.
pub fn fit_even_polynomial(kappas: &[f64], d2: &[f64], degree: usize) -> Result<Vec<f64>> {
    if kappas.len() != d2.len() || kappas.len() < degree + 1 {
        return Err(Error::InvalidParameter(format!("need at least {} fit points", degree + 1)));
    }
    let scale = kappas.iter().fold(0.0f64, |a, k| a.max(k * k));
    if scale == 0.0 {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let x = DMatrix::from_fn(kappas.len(), degree + 1, |r, c| (kappas[r].powi(2) / scale).powi(c as i32));
    let xtx = x.transpose() * &x;
    let ev = xtx.clone().symmetric_eigenvalues();
    let cond = ev.max() / ev.min().max(f64::MIN_POSITIVE);
    if !(cond < MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let y = nalgebra::DVector::from_column_slice(d2);
    let beta = xtx
        .cholesky()
        .ok_or(Error::IllConditioned(cond))?
        .solve(&(x.transpose() * y));
    Ok(beta.iter().enumerate().map(|(k, b)| b / scale.powi(k as i32)).collect())
}

/// Fisher matrix from Hellinger distances between `base` and `dist_at(κ)`.
/// Diagonal entries come from the axes `e_i`, off-diagonal entries by
/// polarization over `e_i ± e_j`.
pub fn hellinger_fisher_with<F>(base: &[f64], n: usize, dist_at: F, schedule: &KappaSchedule) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let kappas = schedule.kappas();
    let curvature = |dir: &[f64]| -> Result<f64> {
        let d2 = kappas
            .iter()
            .map(|&k| {
                let v: Vec<f64> = dir.iter().map(|d| d * k).collect();
                Ok(hellinger_distance_sq(&dist_at(&v)?, base))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(8.0 * fit_even_polynomial(&kappas, &d2, 1 + usize::from(schedule.quartic))?[1])
    };
    let mut dirs = Vec::new();
    for i in 0..n {
        for j in i..n {
            if i == j {
                dirs.push((i, j, 0.0));
            } else {
                dirs.push((i, j, 1.0));
                dirs.push((i, j, -1.0));
            }
        }
    }
    let vals = dirs
        .par_iter()
        .map(|&(i, j, s)| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            if i != j {
                d[j] = s;
            }
            curvature(&d)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut f = DMatrix::zeros(n, n);
    let mut it = vals.into_iter();
    for i in 0..n {
        for j in i..n {
            if i == j {
                f[(i, i)] = it.next().expect("diagonal");
            } else {
                let plus = it.next().expect("plus");
                let minus = it.next().expect("minus");
                f[(i, j)] = (plus - minus) / 4.0;
                f[(j, i)] = f[(i, j)];
            }
        }
    }
    Ok(f)
}

fn check_displacements(gens: &GeneratorSet) -> Result<()> {
    match gens.generators().iter().find(|g| g.order() != 1) {
        Some(g) => Err(Error::UnsupportedOrder(g.order())),
        None => Ok(()),
    }
}

/// Hellinger Fisher matrix for first-order generators, shifting `probs` on
/// the grid.
pub fn hellinger_fisher_displacement(
    probs: &[f64],
    setting: &MeasurementSetting,
    gens: &GeneratorSet,
    schedule: &KappaSchedule,
) -> Result<DMatrix<f64>> {
    check_displacements(gens)?;
    if probs.len() != setting.cells() {
        return Err(Error::DimensionMismatch {
            expected: setting.cells(),
            got: probs.len(),
        });
    }
    let unit: Vec<Vec<f64>> = gens
        .generators()
        .iter()
        .map(|g| displacement_shifts(g.exponents(), 1.0, &setting.phi))
        .collect::<Result<_>>()?;
    let m = setting.modes();
    let dist_at = |kappa: &[f64]| {
        let mut s = vec![0.0; m];
        for (k, u) in kappa.iter().zip(&unit) {
            s.iter_mut().zip(u).for_each(|(a, b)| *a += k * b);
        }
        Ok(shift_probs(probs, setting, &s))
    };
    hellinger_fisher_with(probs, gens.len(), dist_at, schedule)
}

/// Hellinger Fisher matrix on an exact pdf, with every generator applied to
/// the state before marginalization.
pub fn hellinger_fisher_simulated(
    state: &QuantumState,
    gens: &GeneratorSet,
    setting: &MeasurementSetting,
    schedule: &KappaSchedule,
) -> Result<FisherMatrix> {
    let ens = to_ensemble(state, P_FLOOR)?;
    let base = ensemble_marginal(&ens, setting)?;
    let dist_at = |kappa: &[f64]| {
        let terms: Vec<(&[u8], f64)> = gens
            .generators()
            .iter()
            .zip(kappa)
            .filter(|(_, &k)| k != 0.0)
            .map(|(g, &k)| (g.exponents(), k))
            .collect();
        let evolved = evolve_ensemble(&ens, &terms)?;
        let raw = ensemble_density(&evolved, setting)?;
        let mass: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|p| p / mass).collect())
    };
    let values = hellinger_fisher_with(&base.probs, gens.len(), dist_at, schedule)?;
    Ok(FisherMatrix {
        labels: gens.labels(),
        values,
        phi: setting.phi.clone(),
        method: FisherMethod::Hellinger,
        std_error: None,
    })
}

/// Mean and spread of Hellinger estimates over repeated experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HellingerEstimate {
    /// Mean over replicates, with the replicate standard deviation as error.
    pub fisher: FisherMatrix,
    pub replicates: Vec<DMatrix<f64>>,
    pub n_samples: u64,
}

fn summarize(reps: Vec<DMatrix<f64>>, gens: &GeneratorSet, phi: &[f64], n_samples: u64) -> HellingerEstimate {
    let n = gens.len();
    let count = reps.len() as f64;
    let mean = reps.iter().fold(DMatrix::zeros(n, n), |a, r| a + r) / count;
    let var = reps
        .iter()
        .fold(DMatrix::zeros(n, n), |a, r| a + (r - &mean).map(|x| x * x))
        / (count - 1.0).max(1.0);
    HellingerEstimate {
        fisher: FisherMatrix {
            labels: gens.labels(),
            values: mean,
            phi: phi.to_vec(),
            method: FisherMethod::Hellinger,
            std_error: Some(var.map(f64::sqrt)),
        },
        replicates: reps,
        n_samples,
    }
}

/// Repeats sampling `n_samples` outcomes from `dist` and estimating the
/// displacement Fisher matrix, `reps` times on independent RNG streams.
pub fn hellinger_replicates(
    dist: &GridDistribution,
    gens: &GeneratorSet,
    n_samples: u64,
    reps: usize,
    seed: u64,
    schedule: &KappaSchedule,
) -> Result<HellingerEstimate> {
    check_displacements(gens)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let fits = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let ds = sample_stream(dist, n_samples, seed, r)?;
            hellinger_fisher_displacement(&ds.frequencies(), &dist.setting, gens, schedule)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(fits, gens, &dist.setting.phi, n_samples))
}

/// Displacement Fisher matrix of a measured histogram, with standard errors
/// from `reps` multinomial resamples of the histogram itself.
pub fn bootstrap_dataset(
    ds: &HomodyneDataset,
    gens: &GeneratorSet,
    reps: usize,
    seed: u64,
    schedule: &KappaSchedule,
) -> Result<FisherMatrix> {
    let freqs = ds.frequencies();
    let point = hellinger_fisher_displacement(&freqs, &ds.setting, gens, schedule)?;
    let empirical = GridDistribution {
        setting: ds.setting.clone(),
        probs: freqs,
        mass_defect: 0.0,
    };
    let spread = hellinger_replicates(&empirical, gens, ds.n_samples, reps.max(2), seed, schedule)?;
    Ok(FisherMatrix {
        values: point,
        ..spread.fisher
    })
}
