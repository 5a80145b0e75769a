//! Passive mode-basis changes on quadratures and their lift to generator sets.
//!
//! A basis change is a real orthogonal, symplectic `2m × 2m` matrix `O`
//! acting on `ξ = (q₁ … q_m, p₁ … p_m)`. It corresponds to a passive unitary
//! `Ŵ` with `Ŵ† ξ Ŵ = O ξ`, whose mode matrix is `u = X + iY` for
//! `O = [[X, −Y], [Y, X]]`.
//!
//! Mesh layout: `m` columns of nearest-neighbour pairs, even columns starting
//! at pair `(1,2)`, odd columns at `(2,3)`. Element `k` is
//! `T_k = R_pair(θ_k)·Ph_first(φ_k)` and `O = T₁ T₂ ⋯ T_K`. For two modes this
//! is `O(θ, φ) = R(θ)·Ph(φ)`. The trailing layer of local phases is omitted.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorSet, Partition};

const ORTHO_TOLERANCE: f64 = 1e-10;

/// Number of beamsplitter angles (and of phases) for `m` modes.
pub fn parameter_count(modes: usize) -> usize {
    modes * (modes.saturating_sub(1)) / 2
}

/// Mode pairs `(i, i+1)` (0-based) in mesh order.
pub fn mesh_pairs(modes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(parameter_count(modes));
    for col in 0..modes {
        let mut i = col % 2;
        while i + 1 < modes {
            pairs.push((i, i + 1));
            i += 2;
        }
    }
    pairs
}

/// Quadrature form of a real beamsplitter between modes `i` and `j`:
/// `q_i → c q_i + s q_j`, `q_j → −s q_i + c q_j`, and the same for `p`.
pub fn beamsplitter_block(modes: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let mut o = DMatrix::identity(2 * modes, 2 * modes);
    for off in [0, modes] {
        o[(off + i, off + i)] = c;
        o[(off + i, off + j)] = s;
        o[(off + j, off + i)] = -s;
        o[(off + j, off + j)] = c;
    }
    o
}

/// Quadrature form of a phase rotation on mode `i`:
/// `q_i → cos φ q_i + sin φ p_i`, `p_i → −sin φ q_i + cos φ p_i`.
pub fn phase_block(modes: usize, i: usize, phi: f64) -> DMatrix<f64> {
    let (s, c) = phi.sin_cos();
    let mut o = DMatrix::identity(2 * modes, 2 * modes);
    o[(i, i)] = c;
    o[(i, modes + i)] = s;
    o[(modes + i, i)] = -s;
    o[(modes + i, modes + i)] = c;
    o
}

/// Symplectic form `Ω = [[0, 𝟙], [−𝟙, 0]]` for the `(q…, p…)` ordering.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(k, modes + k)] = 1.0;
        w[(modes + k, k)] = -1.0;
    }
    w
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisChange {
    modes: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    #[serde(skip)]
    o: DMatrix<f64>,
}

impl PartialEq for BasisChange {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.theta == other.theta && self.phi == other.phi
    }
}

/// Builds the mesh transformation from beamsplitter angles and phases.
pub fn clements_orthogonal(theta: &[f64], phi: &[f64], modes: usize) -> Result<BasisChange> {
    let k = parameter_count(modes);
    if modes == 0 || theta.len() != k || phi.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{modes} modes need {k} angles and {k} phases, got {} and {}",
            theta.len(),
            phi.len()
        )));
    }
    let mut o = DMatrix::identity(2 * modes, 2 * modes);
    for (idx, &(i, j)) in mesh_pairs(modes).iter().enumerate() {
        o = o * beamsplitter_block(modes, i, j, theta[idx]) * phase_block(modes, i, phi[idx]);
    }
    Ok(BasisChange {
        modes,
        theta: theta.to_vec(),
        phi: phi.to_vec(),
        o,
    })
}

impl BasisChange {
    pub fn identity(modes: usize) -> Self {
        let k = parameter_count(modes);
        clements_orthogonal(&vec![0.0; k], &vec![0.0; k], modes).expect("valid counts")
    }

    /// From the flat vector `ϑ = (θ₁ … θ_K, φ₁ … φ_K)`.
    pub fn from_params(params: &[f64], modes: usize) -> Result<Self> {
        let k = parameter_count(modes);
        if params.len() != 2 * k {
            return Err(Error::InvalidParameter(format!(
                "{modes} modes need {} parameters, got {}",
                2 * k,
                params.len()
            )));
        }
        clements_orthogonal(&params[..k], &params[k..], modes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn params(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }

    /// Quadrature transformation. Rebuilt if the value was deserialized.
    pub fn orthogonal(&self) -> DMatrix<f64> {
        if self.o.nrows() == 2 * self.modes {
            self.o.clone()
        } else {
            clements_orthogonal(&self.theta, &self.phi, self.modes)
                .expect("stored parameters are consistent")
                .o
        }
    }

    /// Mode matrix `u` of the passive unitary realizing this basis change.
    pub fn mode_unitary(&self) -> DMatrix<Complex64> {
        mode_unitary_of(&self.orthogonal())
    }
}

/// `u = X + iY` from `O = [[X, −Y], [Y, X]]`.
pub fn mode_unitary_of(o: &DMatrix<f64>) -> DMatrix<Complex64> {
    let m = o.nrows() / 2;
    DMatrix::from_fn(m, m, |r, c| Complex64::new(o[(r, c)], o[(m + r, c)]))
}

/// `O = [[X, −Y], [Y, X]]` from `u = X + iY`.
pub fn orthogonal_of(u: &DMatrix<Complex64>) -> DMatrix<f64> {
    let m = u.nrows();
    let mut o = DMatrix::zeros(2 * m, 2 * m);
    for r in 0..m {
        for c in 0..m {
            let z = u[(r, c)];
            o[(r, c)] = z.re;
            o[(r, m + c)] = -z.im;
            o[(m + r, c)] = z.im;
            o[(m + r, m + c)] = z.re;
        }
    }
    o
}

/// Largest entry of `|OᵀO − 𝟙|` and of `|OᵀΩO − Ω|`.
pub fn orthosymplectic_deviation(o: &DMatrix<f64>) -> (f64, f64) {
    let n = o.nrows();
    let ortho = (o.transpose() * o - DMatrix::<f64>::identity(n, n)).amax();
    let w = symplectic_form(n / 2);
    let sympl = (o.transpose() * &w * o - w).amax();
    (ortho, sympl)
}

pub fn check_orthosymplectic(o: &DMatrix<f64>) -> Result<()> {
    let (a, b) = orthosymplectic_deviation(o);
    let dev = a.max(b);
    if dev > ORTHO_TOLERANCE {
        return Err(Error::NotOrthogonal(dev));
    }
    Ok(())
}

/// Generator-level representation of a basis change.
#[derive(Debug, Clone)]
pub struct LiftedBasisChange {
    pub u: DMatrix<f64>,
}

fn multiset(exps: &[u8]) -> Vec<usize> {
    exps.iter()
        .enumerate()
        .flat_map(|(j, &k)| std::iter::repeat_n(j, k as usize))
        .collect()
}

/// Permanent by dynamic programming over column subsets.
fn permanent(a: &[[f64; 3]; 3], n: usize) -> f64 {
    let mut dp = [0.0f64; 8];
    dp[0] = 1.0;
    for mask in 1usize..(1 << n) {
        let row = mask.count_ones() as usize - 1;
        let mut acc = 0.0;
        for j in 0..n {
            if mask & (1 << j) != 0 {
                acc += dp[mask ^ (1 << j)] * a[row][j];
            }
        }
        dp[mask] = acc;
    }
    dp[(1 << n) - 1]
}

/// `U_il = perm(O[α(i), β(l)]) / Π_j k_j^{(l)}!`, block-diagonal by order.
///
/// With this definition `⟨H_i⟩` in the state `Ŵ|ψ⟩` equals
/// `Σ_l U_il ⟨H_l⟩` in `|ψ⟩`.
pub fn lift_matrix(o: &DMatrix<f64>, gens: &GeneratorSet) -> Result<DMatrix<f64>> {
    let m = gens.modes();
    if o.nrows() != 2 * m || o.ncols() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: o.nrows(),
        });
    }
    if gens.max_order() > 3 {
        return Err(Error::UnsupportedOrder(gens.max_order()));
    }
    let fact = [1.0, 1.0, 2.0, 6.0];
    let n = gens.len();
    let mut u = DMatrix::zeros(n, n);
    let sets: Vec<Vec<usize>> = gens.generators().iter().map(|g| multiset(g.exponents())).collect();
    let norms: Vec<f64> = gens
        .generators()
        .iter()
        .map(|g| g.exponents().iter().map(|&k| fact[k as usize]).product())
        .collect();
    for order in 1..=gens.max_order() {
        let range = gens.order_range(order);
        for i in range.clone() {
            let alpha = &sets[i];
            for l in range.clone() {
                let beta = &sets[l];
                let mut sub = [[0.0; 3]; 3];
                for (r, &a) in alpha.iter().enumerate() {
                    for (c, &b) in beta.iter().enumerate() {
                        sub[r][c] = o[(a, b)];
                    }
                }
                let v = permanent(&sub, order);
                if v != 0.0 {
                    u[(i, l)] = v / norms[l];
                }
            }
        }
    }
    Ok(u)
}

pub fn lift(bc: &BasisChange, gens: &GeneratorSet) -> Result<LiftedBasisChange> {
    if bc.modes() != gens.modes() {
        return Err(Error::DimensionMismatch {
            expected: gens.modes(),
            got: bc.modes(),
        });
    }
    Ok(LiftedBasisChange {
        u: lift_matrix(&bc.orthogonal(), gens)?,
    })
}

/// Keeps rows and columns of generators local to a block of `partition`.
/// Returns the reduced matrix and the kept indices.
pub fn restrict_local(
    matrix: &DMatrix<f64>,
    gens: &GeneratorSet,
    partition: &Partition,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if matrix.nrows() != gens.len() || matrix.ncols() != gens.len() {
        return Err(Error::DimensionMismatch {
            expected: gens.len(),
            got: matrix.nrows(),
        });
    }
    let keep = gens.local_indices(partition)?;
    let k = keep.len();
    let reduced = DMatrix::from_fn(k, k, |r, c| matrix[(keep[r], keep[c])]);
    Ok((reduced, keep))
}
