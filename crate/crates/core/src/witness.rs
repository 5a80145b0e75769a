//! Quantum Fisher information and covariance matrices over generator sets,
//! and the metrological entanglement witness minimized over mode bases.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::moments::{apply_generators, inner};
use crate::fock::{to_ensemble, QuantumState};
use crate::generators::{GeneratorSet, Locality, Partition};
use crate::mode_basis::{lift_matrix, parameter_count, BasisChange};
use crate::optimize::{minimize, Domain, OptimizeResult, OptimizerConfig};

/// Eigenvalues of `ρ` below this are dropped before building the QFI.
pub const P_FLOOR: f64 = 1e-12;
/// Eigenpairs with `p_k + p_l` below this are skipped in the QFI pair sum.
pub const PAIR_FLOOR: f64 = 1e-10;
/// `W` above this is reported as witnessed entanglement.
pub const WITNESS_THRESHOLD: f64 = 1e-6;

/// First and second moments of a state over a generator set.
#[derive(Debug, Clone)]
pub struct StateMoments {
    pub gens: GeneratorSet,
    pub means: Vec<f64>,
    /// `Γ_ij = ½⟨{H_i, H_j}⟩ − ⟨H_i⟩⟨H_j⟩`.
    pub cov: DMatrix<f64>,
    /// QFI matrix, normalized so that `Q = 4Γ` for pure states.
    pub qfi: DMatrix<f64>,
    pub pure: bool,
}

/// Computes means, covariance and QFI over the full generator set.
///
/// The QFI is `Q_ij = 2 Σ_{kl} (p_k−p_l)²/(p_k+p_l) Re(⟨ψ_k|H_i|ψ_l⟩⟨ψ_l|H_j|ψ_k⟩)`,
/// evaluated as `4 Σ_k p_k Re⟨H_iψ_k|H_jψ_k⟩ − 8 Σ_{kl} p_k p_l/(p_k+p_l) Re(A^i_kl conj A^j_kl)`
/// where the second sum runs over retained eigenvectors only.
pub fn state_moments(state: &QuantumState, gens: &GeneratorSet) -> Result<StateMoments> {
    if state.modes() != gens.modes() {
        return Err(Error::DimensionMismatch {
            expected: gens.modes(),
            got: state.modes(),
        });
    }
    let ens = to_ensemble(state, P_FLOOR)?;
    let monomials: Vec<&[u8]> = gens.generators().iter().map(|g| g.exponents()).collect();
    let applied = apply_generators(&ens, &monomials)?;
    let n = gens.len();
    let p = &applied.weights;
    let kdim = p.len();

    let means: Vec<f64> = (0..n)
        .map(|i| (0..kdim).map(|k| p[k] * inner(&applied.psi[k], &applied.h[i][k]).re).sum())
        .collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..kdim)
                        .map(|k| p[k] * inner(&applied.h[i][k], &applied.h[j][k]).re)
                        .sum()
                })
                .collect()
        })
        .collect();
    let second = DMatrix::from_fn(n, n, |i, j| 0.5 * (rows[i][j] + rows[j][i]));
    let cov = DMatrix::from_fn(n, n, |i, j| second[(i, j)] - means[i] * means[j]);

    // A^i_kl = ⟨ψ_k|H_i|ψ_l⟩
    let amps: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut a = Vec::with_capacity(kdim * kdim);
            for k in 0..kdim {
                for l in 0..kdim {
                    a.push(inner(&applied.psi[k], &applied.h[i][l]));
                }
            }
            a
        })
        .collect();
    let mut pair_w = vec![0.0; kdim * kdim];
    for k in 0..kdim {
        for l in 0..kdim {
            let s = p[k] + p[l];
            if s > PAIR_FLOOR {
                pair_w[k * kdim + l] = p[k] * p[l] / s;
            }
        }
    }
    let cross: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    amps[i]
                        .iter()
                        .zip(&amps[j])
                        .zip(&pair_w)
                        .map(|((a, b), w)| w * (a * b.conj()).re)
                        .sum()
                })
                .collect()
        })
        .collect();
    let qfi = DMatrix::from_fn(n, n, |i, j| {
        4.0 * second[(i, j)] - 4.0 * (cross[i][j] + cross[j][i])
    });

    Ok(StateMoments {
        gens: gens.clone(),
        means,
        cov,
        qfi,
        pure: state.is_pure(),
    })
}

pub fn qfi_matrix(state: &QuantumState, gens: &GeneratorSet) -> Result<DMatrix<f64>> {
    Ok(state_moments(state, gens)?.qfi)
}

pub fn covariance_matrix(state: &QuantumState, gens: &GeneratorSet) -> Result<DMatrix<f64>> {
    Ok(state_moments(state, gens)?.cov)
}

/// `Γ_Π`: keeps entries whose two generators are local to the same block and
/// zeroes the rest. `indices[r]` is the generator behind row `r` of `gamma`.
pub fn product_cov(
    gamma: &DMatrix<f64>,
    gens: &GeneratorSet,
    indices: &[usize],
    partition: &Partition,
) -> Result<DMatrix<f64>> {
    let blocks = block_labels(gens, indices, partition)?;
    if gamma.nrows() != indices.len() || gamma.ncols() != indices.len() {
        return Err(Error::DimensionMismatch {
            expected: indices.len(),
            got: gamma.nrows(),
        });
    }
    Ok(mask_by_blocks(gamma, &blocks))
}

fn block_labels(gens: &GeneratorSet, indices: &[usize], partition: &Partition) -> Result<Vec<usize>> {
    let loc = gens.locality(partition)?;
    indices
        .iter()
        .map(|&i| match loc[i] {
            Locality::Local(b) => Ok(b),
            Locality::NonLocal => Err(Error::NonLocalGenerator(gens.get(i).to_string())),
        })
        .collect()
}

fn mask_by_blocks(m: &DMatrix<f64>, blocks: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        if blocks[r] == blocks[c] {
            m[(r, c)]
        } else {
            0.0
        }
    })
}

/// `λ_max(Q − 4Γ_Π)`.
pub fn witness_value(q_local: &DMatrix<f64>, gamma_pi: &DMatrix<f64>) -> Result<f64> {
    if q_local.shape() != gamma_pi.shape() || q_local.nrows() != q_local.ncols() {
        return Err(Error::DimensionMismatch {
            expected: q_local.nrows(),
            got: gamma_pi.nrows(),
        });
    }
    let d = q_local - gamma_pi * 4.0;
    Ok(max_eigenvalue(&d))
}

pub(crate) fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Precomputed data for evaluating `E(ϑ)` for one partition.
#[derive(Debug, Clone)]
pub struct WitnessProblem {
    gens: GeneratorSet,
    partition: Partition,
    q: DMatrix<f64>,
    gamma: DMatrix<f64>,
    keep: Vec<usize>,
    blocks: Vec<usize>,
}

impl WitnessProblem {
    /// `q` and `gamma` are full-set matrices in the preparation basis.
    pub fn new(q: DMatrix<f64>, gamma: DMatrix<f64>, gens: &GeneratorSet, partition: &Partition) -> Result<Self> {
        let n = gens.len();
        for m in [&q, &gamma] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        let keep = gens.local_indices(partition)?;
        let blocks = block_labels(gens, &keep, partition)?;
        Ok(Self {
            gens: gens.clone(),
            partition: partition.clone(),
            q,
            gamma,
            keep,
            blocks,
        })
    }

    pub fn from_moments(m: &StateMoments, partition: &Partition) -> Result<Self> {
        Self::new(m.qfi.clone(), m.cov.clone(), &m.gens, partition)
    }

    pub fn gens(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn modes(&self) -> usize {
        self.gens.modes()
    }

    /// `E` for the quadrature transformation `o`.
    pub fn evaluate_orthogonal(&self, o: &DMatrix<f64>) -> Result<f64> {
        let u = lift_matrix(o, &self.gens)?;
        let k = self.keep.len();
        let u_loc = DMatrix::from_fn(k, u.ncols(), |r, c| u[(self.keep[r], c)]);
        let q = &u_loc * &self.q * u_loc.transpose();
        let g = &u_loc * &self.gamma * u_loc.transpose();
        witness_value(&q, &mask_by_blocks(&g, &self.blocks))
    }

    pub fn evaluate(&self, bc: &BasisChange) -> Result<f64> {
        self.evaluate_orthogonal(&bc.orthogonal())
    }

    /// `E(ϑ)` for the flat parameter vector `(θ…, φ…)`.
    pub fn evaluate_params(&self, params: &[f64]) -> Result<f64> {
        self.evaluate(&BasisChange::from_params(params, self.modes())?)
    }
}

/// `E(ϑ)` from precomputed full-set matrices.
pub fn witness_in_basis(
    q_full: &DMatrix<f64>,
    gamma_full: &DMatrix<f64>,
    gens: &GeneratorSet,
    partition: &Partition,
    bc: &BasisChange,
) -> Result<f64> {
    WitnessProblem::new(q_full.clone(), gamma_full.clone(), gens, partition)?.evaluate(bc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    pub partition: String,
    pub order: usize,
    /// Refined minimum `W_Q`.
    pub value: f64,
    /// Best value among the initial samples.
    pub sampled_value: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub witnessed: bool,
    pub converged: bool,
    pub optimizer: OptimizeResult,
}

/// Default optimizer for an `m`-mode witness: grid and simplex for two modes,
/// genetic search above.
pub fn default_config(modes: usize, seed: u64) -> OptimizerConfig {
    if modes <= 2 {
        OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        }
    } else {
        OptimizerConfig::genetic(seed)
    }
}

/// `W_Q = min_ϑ E(ϑ)`.
pub fn mode_intrinsic_witness(problem: &WitnessProblem, cfg: &OptimizerConfig) -> Result<WitnessReport> {
    let m = problem.modes();
    let k = parameter_count(m);
    let objective = |x: &[f64]| problem.evaluate_params(x).unwrap_or(f64::INFINITY);
    let result = minimize(&objective, &Domain::angles(2 * k), cfg)?;
    Ok(WitnessReport {
        partition: problem.partition().to_string(),
        order: problem.gens().max_order(),
        value: result.value,
        sampled_value: result.sampled_value,
        theta: result.x[..k].to_vec(),
        phi: result.x[k..].to_vec(),
        witnessed: result.value > WITNESS_THRESHOLD,
        converged: result.converged,
        optimizer: result,
    })
}

/// Minimizes over several optimizer seeds and keeps the best run.
pub fn mode_intrinsic_witness_multistart(
    problem: &WitnessProblem,
    cfg: &OptimizerConfig,
    seeds: &[u64],
) -> Result<WitnessReport> {
    let mut best: Option<WitnessReport> = None;
    for &s in seeds {
        let c = OptimizerConfig { seed: s, ..cfg.clone() };
        let r = mode_intrinsic_witness(problem, &c)?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no optimizer seeds".into()))
}
