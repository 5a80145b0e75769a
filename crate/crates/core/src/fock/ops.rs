//! State preparation and channels: squeezing, passive interferometers,
//! photon subtraction and loss.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::FockBasis;
use super::state::{DensityState, PureState, QuantumState};
use crate::error::{Error, Result};

pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-8;
pub const SUBTRACTION_NORM_FLOOR: f64 = 1e-12;
const UNITARY_TOLERANCE: f64 = 1e-10;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Converts a squeezing level in dB to the squeezing parameter `r`.
///
/// `|r| = ln(10)·|s_dB|/20`, so the squeezed quadrature has variance
/// `10^(−|s_dB|/10)`. Positive values squeeze `q`, negative values squeeze `p`.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

pub fn r_to_db(r: f64) -> f64 {
    r * 20.0 / std::f64::consts::LN_10
}

/// Fock amplitudes of `S(r)|0⟩` with `S(r) = exp[(r/2)(a² − a†²)]`, up to `max_n`.
pub fn single_mode_squeezed_amplitudes(r: f64, max_n: usize) -> Vec<f64> {
    let t = r.tanh();
    let mut amps = vec![0.0; max_n + 1];
    let mut c = 1.0 / r.cosh().sqrt();
    let mut n = 0usize;
    while 2 * n <= max_n {
        amps[2 * n] = c;
        c *= -t * ((2 * n + 1) as f64 / (2 * n + 2) as f64).sqrt();
        n += 1;
    }
    amps
}

/// Product of single-mode squeezed vacua, truncated to `Σ n ≤ cutoff`.
///
/// The discarded probability is the leakage; it is rejected above
/// `leakage_threshold`.
pub fn squeezed_vacuum_with_threshold(
    r: &[f64],
    cutoff: usize,
    leakage_threshold: f64,
) -> Result<PureState> {
    if cutoff < 2 {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff} < 2")));
    }
    if r.is_empty() {
        return Err(Error::InvalidParameter("no modes".into()));
    }
    let basis = FockBasis::shared(r.len(), cutoff)?;
    let per_mode: Vec<Vec<f64>> = r
        .iter()
        .map(|&ri| single_mode_squeezed_amplitudes(ri, cutoff))
        .collect();
    let amplitudes: Vec<Complex64> = (0..basis.dim())
        .map(|i| {
            let occ = basis.occupation(i);
            let a: f64 = occ
                .iter()
                .zip(&per_mode)
                .map(|(&n, amps)| amps[n as usize])
                .product();
            Complex64::new(a, 0.0)
        })
        .collect();
    let retained: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let leakage = (1.0 - retained).max(0.0);
    if leakage > leakage_threshold {
        return Err(Error::Leakage {
            leakage,
            threshold: leakage_threshold,
        });
    }
    PureState::from_amplitudes(basis, amplitudes)
}

pub fn squeezed_vacuum(r: &[f64], cutoff: usize) -> Result<PureState> {
    squeezed_vacuum_with_threshold(r, cutoff, DEFAULT_LEAKAGE_THRESHOLD)
}

/// Largest deviation of `u†u` from the identity.
pub fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let p = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((p[(i, j)] - target).norm());
        }
    }
    dev
}

/// A passive interferometer factored into two-mode rotations and phases,
/// ready to act on Fock-space vectors.
///
/// Convention: the Heisenberg action is `â → u â`; equivalently a single
/// photon in mode k is sent to `Σ_l u_lk |1_l⟩`, and a 50:50 beamsplitter
/// `u = [[1, 1], [−1, 1]]/√2` maps `|1,0⟩ → (|1,0⟩ − |0,1⟩)/√2`.
#[derive(Debug, Clone)]
pub struct PassiveUnitary {
    modes: usize,
    phases: Vec<Complex64>,
    /// Applied in order after the phases.
    rotations: Vec<(usize, usize, [[Complex64; 2]; 2])>,
}

impl PassiveUnitary {
    pub fn new(u: &DMatrix<Complex64>) -> Result<Self> {
        let m = u.nrows();
        if u.ncols() != m || m == 0 {
            return Err(Error::InvalidParameter("mode unitary must be square".into()));
        }
        let dev = unitarity_deviation(u);
        if dev > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary(dev));
        }
        let mut w = u.clone();
        let mut givens = Vec::new();
        for c in 0..m {
            for r in (c + 1..m).rev() {
                let a = w[(r - 1, c)];
                let b = w[(r, c)];
                if b.norm() < 1e-300 {
                    continue;
                }
                let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
                let g = [[a.conj() / rho, b.conj() / rho], [-b / rho, a / rho]];
                for col in 0..m {
                    let x = w[(r - 1, col)];
                    let y = w[(r, col)];
                    w[(r - 1, col)] = g[0][0] * x + g[0][1] * y;
                    w[(r, col)] = g[1][0] * x + g[1][1] * y;
                }
                givens.push((r - 1, r, g));
            }
        }
        let phases = (0..m).map(|k| w[(k, k)]).collect();
        // u = G_1† ⋯ G_K† D, so after D the adjoints act from G_K† down to G_1†.
        let rotations = givens
            .into_iter()
            .rev()
            .map(|(i, j, g)| {
                let adj = [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]];
                (i, j, adj)
            })
            .collect();
        Ok(Self {
            modes: m,
            phases,
            rotations,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn apply_to_vector(&self, basis: &FockBasis, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(basis.modes(), self.modes);
        let mut out: Vec<Complex64> = (0..basis.dim())
            .map(|idx| {
                let occ = basis.occupation(idx);
                let mut f = Complex64::new(1.0, 0.0);
                for (k, &n) in occ.iter().enumerate() {
                    f *= self.phases[k].powu(n as u32);
                }
                f * v[idx]
            })
            .collect();
        for (i, j, g) in &self.rotations {
            out = apply_two_mode(basis, *i, *j, g, &out);
        }
        out
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Matrix of a two-mode passive unitary `v` on the sector `n_i + n_j = s`,
/// indexed by the photon number of the first mode.
fn two_mode_sector(v: &[[Complex64; 2]; 2], s: usize, fact: &[f64]) -> Vec<Complex64> {
    let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);
    let mut t = vec![C0; (s + 1) * (s + 1)];
    for n0 in 0..=s {
        let n1 = s - n0;
        for x in 0..=n0 {
            let cx = v[0][0].powu(x as u32) * v[1][0].powu((n0 - x) as u32) * binom(n0, x);
            for y in 0..=n1 {
                let cy = v[0][1].powu(y as u32) * v[1][1].powu((n1 - y) as u32) * binom(n1, y);
                let k = x + y;
                t[k * (s + 1) + n0] += cx * cy;
            }
        }
        for k in 0..=s {
            let scale = (fact[k] * fact[s - k] / (fact[n0] * fact[n1])).sqrt();
            t[k * (s + 1) + n0] *= scale;
        }
    }
    t
}

fn apply_two_mode(
    basis: &FockBasis,
    i: usize,
    j: usize,
    v: &[[Complex64; 2]; 2],
    input: &[Complex64],
) -> Vec<Complex64> {
    let cutoff = basis.cutoff();
    let fact = factorials(cutoff);
    let sectors: Vec<Vec<Complex64>> = (0..=cutoff).map(|s| two_mode_sector(v, s, &fact)).collect();
    let mut out = vec![C0; basis.dim()];
    let mut occ = vec![0u16; basis.modes()];
    for idx in 0..basis.dim() {
        let a = input[idx];
        if a == C0 {
            continue;
        }
        occ.copy_from_slice(basis.occupation(idx));
        let n0 = occ[i] as usize;
        let s = n0 + occ[j] as usize;
        let t = &sectors[s];
        for k in 0..=s {
            let coef = t[k * (s + 1) + n0];
            if coef == C0 {
                continue;
            }
            occ[i] = k as u16;
            occ[j] = (s - k) as u16;
            let target = basis.index_of(&occ).expect("sector stays in basis");
            out[target] += coef * a;
        }
    }
    out
}

/// Applies the passive interferometer with mode matrix `u` (Heisenberg `â → u â`).
pub fn apply_passive_unitary(state: &PureState, u: &DMatrix<Complex64>) -> Result<PureState> {
    if u.nrows() != state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes(),
            got: u.nrows(),
        });
    }
    let op = PassiveUnitary::new(u)?;
    let out = op.apply_to_vector(state.basis(), state.amplitudes());
    PureState::from_amplitudes(state.basis().clone(), out)
}

pub fn apply_passive_unitary_density(
    state: &DensityState,
    u: &DMatrix<Complex64>,
) -> Result<DensityState> {
    if u.nrows() != state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes(),
            got: u.nrows(),
        });
    }
    let op = PassiveUnitary::new(u)?;
    let basis = state.basis();
    let d = basis.dim();
    let rho = state.matrix();
    let mut half = DMatrix::zeros(d, d);
    for c in 0..d {
        let col: Vec<Complex64> = rho.column(c).iter().copied().collect();
        let t = op.apply_to_vector(basis, &col);
        for r in 0..d {
            half[(r, c)] = t[r];
        }
    }
    let half_adj = half.adjoint();
    let mut out = DMatrix::zeros(d, d);
    for c in 0..d {
        let col: Vec<Complex64> = half_adj.column(c).iter().copied().collect();
        let t = op.apply_to_vector(basis, &col);
        for r in 0..d {
            out[(r, c)] = t[r];
        }
    }
    Ok(DensityState::from_parts(basis.clone(), out))
}

/// Unit coefficient vector from hyperspherical angles:
/// `(cos Θ₁, sin Θ₁ cos Θ₂, …, sin Θ₁ ⋯ sin Θ_{m−1})`.
pub fn subtraction_coefficients(angles: &[f64]) -> Vec<Complex64> {
    let m = angles.len() + 1;
    let mut c = vec![C0; m];
    let mut prefix = 1.0;
    for (k, &a) in angles.iter().enumerate() {
        c[k] = Complex64::new(prefix * a.cos(), 0.0);
        prefix *= a.sin();
    }
    c[m - 1] = Complex64::new(prefix, 0.0);
    c
}

/// Result of a photon subtraction: the renormalized state and the norm of
/// `(Σ c_k â_k)|ψ⟩` before renormalization.
#[derive(Debug, Clone)]
pub struct Subtracted {
    pub state: PureState,
    pub raw_norm: f64,
}

/// Applies `Σ_k c_k â_k` and renormalizes.
pub fn subtract_photon(state: &PureState, coeffs: &[Complex64]) -> Result<Subtracted> {
    if coeffs.len() != state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes(),
            got: coeffs.len(),
        });
    }
    let basis = state.basis();
    let mut out = vec![C0; basis.dim()];
    let mut occ = vec![0u16; basis.modes()];
    for (idx, &a) in state.amplitudes().iter().enumerate() {
        if a == C0 {
            continue;
        }
        occ.copy_from_slice(basis.occupation(idx));
        for (k, &c) in coeffs.iter().enumerate() {
            let n = occ[k];
            if n == 0 || c == C0 {
                continue;
            }
            occ[k] = n - 1;
            let t = basis.index_of(&occ).expect("lowering stays in basis");
            out[t] += c * (n as f64).sqrt() * a;
            occ[k] = n;
        }
    }
    let raw_norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if raw_norm < SUBTRACTION_NORM_FLOOR {
        return Err(Error::VanishingSubtraction(raw_norm));
    }
    out.iter_mut().for_each(|a| *a /= raw_norm);
    Ok(Subtracted {
        state: PureState::from_normalized(basis.clone(), out),
        raw_norm,
    })
}

/// Photon subtraction along hyperspherical angles (`cos Θ â₁ + sin Θ â₂` for two modes).
pub fn subtract_photon_at_angles(state: &PureState, angles: &[f64]) -> Result<Subtracted> {
    if angles.len() + 1 != state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes() - 1,
            got: angles.len(),
        });
    }
    subtract_photon(state, &subtraction_coefficients(angles))
}

/// Per-mode amplitude damping with efficiencies `eta`.
///
/// Kraus elements `⟨n−k|K_k|n⟩ = √(C(n,k) η^{n−k} (1−η)^k)`.
pub fn apply_loss(state: &QuantumState, eta: &[f64]) -> Result<DensityState> {
    let rho = match state {
        QuantumState::Pure(p) => p.to_density()?,
        QuantumState::Mixed(d) => d.clone(),
    };
    if eta.len() != rho.modes() {
        return Err(Error::DimensionMismatch {
            expected: rho.modes(),
            got: eta.len(),
        });
    }
    if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidParameter(format!("efficiency {bad} outside [0, 1]")));
    }
    let mut out = rho;
    for (mode, &e) in eta.iter().enumerate() {
        if e < 1.0 {
            out = loss_on_mode(&out, mode, e);
        }
    }
    Ok(out)
}

fn loss_on_mode(rho: &DensityState, mode: usize, eta: f64) -> DensityState {
    let basis = rho.basis();
    let d = basis.dim();
    let cutoff = basis.cutoff();
    let fact = factorials(cutoff);
    // kraus[n][k] = √(C(n,k) η^{n−k} (1−η)^k)
    let kraus: Vec<Vec<f64>> = (0..=cutoff)
        .map(|n| {
            (0..=n)
                .map(|k| {
                    let c = fact[n] / (fact[k] * fact[n - k]);
                    (c * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt()
                })
                .collect()
        })
        .collect();
    // lowered[idx][k] = index of idx with k photons removed from `mode`
    let lowered: Vec<Vec<usize>> = (0..d)
        .map(|idx| {
            let mut occ = basis.occupation(idx).to_vec();
            let n = occ[mode] as usize;
            (0..=n)
                .map(|k| {
                    occ[mode] = (n - k) as u16;
                    basis.index_of(&occ).unwrap()
                })
                .collect()
        })
        .collect();
    let m = rho.matrix();
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for a in 0..d {
        let na = lowered[a].len() - 1;
        for b in 0..d {
            let v = m[(a, b)];
            if v == C0 {
                continue;
            }
            let nb = lowered[b].len() - 1;
            for k in 0..=na.min(nb) {
                let w = kraus[na][k] * kraus[nb][k];
                out[(lowered[a][k], lowered[b][k])] += v * w;
            }
        }
    }
    DensityState::from_parts(basis.clone(), out)
}

/// Shared-basis helper for tests and recipes.
pub fn vacuum_state(modes: usize, cutoff: usize) -> Result<PureState> {
    Ok(PureState::vacuum(Arc::new(FockBasis::new(modes, cutoff)?)))
}
