//! Weyl-symmetrized quadrature monomials and their moments.
//!
//! Quadratures follow `â = (q̂ + i p̂)/2`, so `q̂ = â + â†`, `p̂ = i(â† − â)`,
//! `[q̂, p̂] = 2i` and the vacuum has `Var(q̂) = Var(p̂) = 1`. In `ħ = 1`
//! conventions with `x̂ = (â + â†)/√2` one has `q̂ = √2 x̂`, so every
//! second moment here is twice its `ħ = 1` value.
//!
//! Exponent tuples have length `2m` ordered `(q₁ … q_m, p₁ … p_m)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::basis::FockBasis;
use super::spectral::to_ensemble;
use super::state::{Ensemble, QuantumState};
use crate::error::{Error, Result};

/// Highest total order accepted by [`expectation`].
pub const MOMENT_LIMIT: usize = 6;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Truncated single-mode `(q̂, p̂)` on Fock levels `0..dim`.
pub fn quadrature_matrices(dim: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let q = &a + &ad;
    let p = (&ad - &a) * Complex64::new(0.0, 1.0);
    (q, p)
}

fn binomial_f(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Single-mode `S(q̂^a p̂^b)` on levels `0..dim`, via McCoy's expansion
/// `S(q^a p^b) = 2^{−a} Σ_k C(a,k) q^{a−k} p^b q^k`.
///
/// Entries `⟨n'|·|n⟩` are exact whenever `max(n, n') + a + b < dim`.
pub fn weyl_single_mode(a: usize, b: usize, dim: usize) -> DMatrix<Complex64> {
    let (q, p) = quadrature_matrices(dim);
    let pow = |m: &DMatrix<Complex64>, e: usize| {
        (0..e).fold(DMatrix::<Complex64>::identity(dim, dim), |acc, _| acc * m)
    };
    let pb = pow(&p, b);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..=a {
        let term = pow(&q, a - k) * &pb * pow(&q, k);
        out += term * Complex64::new(binomial_f(a, k), 0.0);
    }
    out / Complex64::new(2f64.powi(a as i32), 0.0)
}

pub fn order_of(exps: &[u8]) -> usize {
    exps.iter().map(|&k| k as usize).sum()
}

/// Applies symmetrized monomials to vectors on a basis extended by `extra`
/// photons, so that `S(·)|ψ⟩` is represented without truncation for any `ψ`
/// on the original basis whenever the monomial order is at most `extra`.
#[derive(Debug)]
pub struct MomentEngine {
    basis: Arc<FockBasis>,
    extended: Arc<FockBasis>,
    embedding: Vec<usize>,
    single: HashMap<(u8, u8), DMatrix<Complex64>>,
    op_dim: usize,
}

impl MomentEngine {
    pub fn new(basis: Arc<FockBasis>, extra: usize) -> Result<Self> {
        let extended = FockBasis::shared(basis.modes(), basis.cutoff() + extra)?;
        let embedding = basis.embedding_into(&extended);
        let op_dim = extended.cutoff() + 2 * extra + 2;
        Ok(Self {
            basis,
            extended,
            embedding,
            single: HashMap::new(),
            op_dim,
        })
    }

    /// Precomputes the single-mode operators needed by the given monomials.
    pub fn prepare<'a>(&mut self, monomials: impl IntoIterator<Item = &'a [u8]>) {
        let m = self.basis.modes();
        for exps in monomials {
            for k in 0..m {
                let key = (exps[k], exps[m + k]);
                if key != (0, 0) && !self.single.contains_key(&key) {
                    let w = weyl_single_mode(key.0 as usize, key.1 as usize, self.op_dim);
                    self.single.insert(key, w);
                }
            }
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn extended(&self) -> &Arc<FockBasis> {
        &self.extended
    }

    pub fn embed(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![C0; self.extended.dim()];
        for (i, &j) in self.embedding.iter().enumerate() {
            out[j] = v[i];
        }
        out
    }

    /// `S(monomial)·v` for `v` on the extended basis. Requires [`prepare`](Self::prepare).
    pub fn apply(&self, exps: &[u8], v: &[Complex64]) -> Vec<Complex64> {
        let m = self.basis.modes();
        let mut cur = v.to_vec();
        for k in 0..m {
            let key = (exps[k], exps[m + k]);
            if key == (0, 0) {
                continue;
            }
            let w = self.single.get(&key).expect("monomial not prepared");
            cur = self.apply_single(k, (key.0 + key.1) as usize, w, &cur);
        }
        cur
    }

    fn apply_single(&self, mode: usize, order: usize, w: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
        let ext = &self.extended;
        let mut out = vec![C0; ext.dim()];
        let mut occ = vec![0u16; ext.modes()];
        for (idx, &a) in v.iter().enumerate() {
            if a == C0 {
                continue;
            }
            occ.copy_from_slice(ext.occupation(idx));
            let n = occ[mode] as usize;
            let lo = n.saturating_sub(order);
            let hi = (n + order).min(ext.cutoff());
            for np in lo..=hi {
                let coef = w[(np, n)];
                if coef == C0 {
                    continue;
                }
                occ[mode] = np as u16;
                if let Some(t) = ext.index_of(&occ) {
                    out[t] += coef * a;
                }
            }
            occ[mode] = n as u16;
        }
        out
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `S(monomial_i)|ψ_k⟩` for every monomial `i` and ensemble component `k`,
/// on the basis extended by the largest monomial order.
#[derive(Debug)]
pub struct AppliedGenerators {
    pub engine: MomentEngine,
    pub weights: Vec<f64>,
    /// Embedded components `|ψ_k⟩`.
    pub psi: Vec<Vec<Complex64>>,
    /// `h[i][k] = S(monomial_i)|ψ_k⟩`.
    pub h: Vec<Vec<Vec<Complex64>>>,
}

pub fn apply_generators(ens: &Ensemble, monomials: &[&[u8]]) -> Result<AppliedGenerators> {
    let m = ens.modes();
    let mut max_order = 0;
    for exps in monomials {
        if exps.len() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: exps.len(),
            });
        }
        max_order = max_order.max(order_of(exps));
    }
    if 2 * max_order > MOMENT_LIMIT {
        return Err(Error::MomentOrder {
            order: 2 * max_order,
            limit: MOMENT_LIMIT,
        });
    }
    let mut engine = MomentEngine::new(ens.basis.clone(), max_order)?;
    engine.prepare(monomials.iter().copied());
    let psi: Vec<Vec<Complex64>> = ens.vectors.iter().map(|v| engine.embed(v)).collect();
    let h = monomials
        .par_iter()
        .map(|exps| psi.iter().map(|v| engine.apply(exps, v)).collect())
        .collect();
    Ok(AppliedGenerators {
        engine,
        weights: ens.weights.clone(),
        psi,
        h,
    })
}

/// `Σ_k p_k ⟨ψ_k| S(monomial) |ψ_k⟩`.
pub fn expectation_ensemble(ens: &Ensemble, exps: &[u8]) -> Result<f64> {
    let m = ens.modes();
    if exps.len() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: exps.len(),
        });
    }
    let order = order_of(exps);
    if order > MOMENT_LIMIT {
        return Err(Error::MomentOrder {
            order,
            limit: MOMENT_LIMIT,
        });
    }
    let mut engine = MomentEngine::new(ens.basis.clone(), order)?;
    engine.prepare([exps]);
    let mut total = 0.0;
    for (w, v) in ens.weights.iter().zip(&ens.vectors) {
        let e = engine.embed(v);
        let hv = engine.apply(exps, &e);
        total += w * inner(&e, &hv).re;
    }
    Ok(total)
}

/// `⟨S(q₁^{k₁} ⋯ p_m^{k_{2m}})⟩` for a pure or mixed state.
pub fn expectation(state: &QuantumState, exps: &[u8]) -> Result<f64> {
    let ens = to_ensemble(state, 0.0)?;
    expectation_ensemble(&ens, exps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ops::{squeezed_vacuum, vacuum_state};
    use approx::assert_abs_diff_eq;

    #[test]
    fn commutator_is_2i_below_top_level() {
        let d = 8;
        let (q, p) = quadrature_matrices(d);
        let comm = &q * &p - &p * &q;
        for n in 0..d {
            for k in 0..d {
                let expected = if n == k && n < d - 1 {
                    Complex64::new(0.0, 2.0)
                } else if n == k {
                    // top level carries the truncation artifact −2i·(d−1)
                    Complex64::new(0.0, -2.0 * (d as f64 - 1.0))
                } else {
                    C0
                };
                assert_abs_diff_eq!((comm[(n, k)] - expected).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_moments() {
        let v: QuantumState = vacuum_state(1, 6).unwrap().into();
        assert_abs_diff_eq!(expectation(&v, &[2, 0]).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&v, &[0, 2]).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&v, &[1, 1]).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&v, &[4, 0]).unwrap(), 3.0, epsilon = 1e-13);
    }

    #[test]
    fn squeezed_variances() {
        let r: f64 = 0.2;
        let s: QuantumState = squeezed_vacuum(&[r], 12).unwrap().into();
        assert_abs_diff_eq!(expectation(&s, &[2, 0]).unwrap(), (-2.0 * r).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(expectation(&s, &[0, 2]).unwrap(), (2.0 * r).exp(), epsilon = 1e-6);
    }

    #[test]
    fn moment_limit_enforced() {
        let v: QuantumState = vacuum_state(1, 4).unwrap().into();
        assert!(matches!(expectation(&v, &[4, 3]), Err(Error::MomentOrder { .. })));
    }
}
