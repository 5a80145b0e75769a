//! Continuous-variable cluster states from adjacency matrices.
//!
//! With `U_V = (𝟙 + iV)(𝟙 + V²)^{−1/2} 𝒪` applied to `p`-squeezed inputs,
//! the nullifiers `δ = p − Vq` become `(𝟙 + V²)^{1/2} 𝒪 p_in`, so
//! `Σ Var(δ_i) = tr(𝒪 D 𝒪ᵀ (𝟙 + V²))` with `D = diag Var(p_in)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ops::{db_to_r, unitarity_deviation};
use crate::fock::QuantumState;
use crate::generators::{build_generator_set, Partition};
use crate::mode_basis::{orthogonal_of, symplectic_form};
use crate::optimize::{minimize, Domain, OptimizeResult, OptimizerConfig};
use crate::witness::{mode_intrinsic_witness_multistart, state_moments, WitnessProblem, WitnessReport};

const TOL: f64 = 1e-10;

/// Adjacency matrices of the named graphs. Edges of the 4- and 5-mode graphs
/// are transcribed from a drawing; node 1 is the subtraction node.
pub fn named_graph(name: &str) -> Result<DMatrix<f64>> {
    let edges: (usize, &[(usize, usize)]) = match name {
        "chain3" => (3, &[(0, 1), (1, 2)]),
        "chain4" => (4, &[(0, 1), (1, 2), (2, 3)]),
        "chain5" => (5, &[(0, 1), (1, 2), (2, 3), (3, 4)]),
        _ => return Err(Error::InvalidParameter(format!("unknown graph '{name}'"))),
    };
    let (m, list) = edges;
    let mut v = DMatrix::zeros(m, m);
    for &(i, j) in list {
        v[(i, j)] = 1.0;
        v[(j, i)] = 1.0;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub adjacency: Vec<Vec<f64>>,
    pub squeezing_db: Vec<f64>,
    /// 0-based node receiving the photon subtraction.
    pub subtraction_mode: usize,
}

impl ClusterSpec {
    pub fn named(name: &str, squeezing_db: Vec<f64>, subtraction_mode: usize) -> Result<Self> {
        let v = named_graph(name)?;
        let adjacency = (0..v.nrows()).map(|r| v.row(r).iter().copied().collect()).collect();
        let spec = Self {
            adjacency,
            squeezing_db,
            subtraction_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn modes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let m = self.modes();
        DMatrix::from_fn(m, m, |r, c| self.adjacency[r][c])
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modes();
        if m == 0 || self.adjacency.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("adjacency must be square".into()));
        }
        check_adjacency(&self.adjacency_matrix())?;
        if self.squeezing_db.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.squeezing_db.len(),
            });
        }
        if self.subtraction_mode >= m {
            return Err(Error::InvalidParameter("subtraction mode out of range".into()));
        }
        Ok(())
    }
}

fn check_adjacency(v: &DMatrix<f64>) -> Result<()> {
    let m = v.nrows();
    if v.ncols() != m {
        return Err(Error::InvalidParameter("adjacency must be square".into()));
    }
    for i in 0..m {
        if v[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter("adjacency diagonal must vanish".into()));
        }
        for j in 0..m {
            if v[(i, j)] != v[(j, i)] {
                return Err(Error::InvalidParameter("adjacency must be symmetric".into()));
            }
        }
    }
    Ok(())
}

/// Function of a symmetric matrix through its eigendecomposition.
fn sym_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `U_V = (𝟙 + iV)(𝟙 + V²)^{−1/2} 𝒪`.
pub fn cluster_unitary(v: &DMatrix<f64>, o_free: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    check_adjacency(v)?;
    let m = v.nrows();
    if o_free.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: o_free.nrows(),
        });
    }
    let dev = (o_free.transpose() * o_free - DMatrix::<f64>::identity(m, m)).amax();
    if dev > TOL {
        return Err(Error::NotOrthogonal(dev));
    }
    let b = DMatrix::<f64>::identity(m, m) + v * v;
    let inv_sqrt = sym_fn(&b, |x| 1.0 / x.sqrt()) * o_free;
    let u = DMatrix::from_fn(m, m, |r, c| {
        let re = inv_sqrt[(r, c)];
        let im: f64 = (0..m).map(|k| v[(r, k)] * inv_sqrt[(k, c)]).sum();
        Complex64::new(re, im)
    });
    let dev = unitarity_deviation(&u);
    if dev > TOL {
        return Err(Error::NotUnitary(dev));
    }
    Ok(u)
}

/// Special orthogonal matrix from `m(m−1)/2` Givens angles over all pairs `i < j`.
pub fn givens_orthogonal(angles: &[f64], m: usize) -> Result<DMatrix<f64>> {
    if angles.len() != m * (m - 1) / 2 {
        return Err(Error::InvalidParameter(format!(
            "{m} modes need {} Givens angles",
            m * (m - 1) / 2
        )));
    }
    let mut o = DMatrix::identity(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in i + 1..m {
            let (s, c) = angles[k].sin_cos();
            let mut g = DMatrix::identity(m, m);
            g[(i, i)] = c;
            g[(i, j)] = -s;
            g[(j, i)] = s;
            g[(j, j)] = c;
            o = o * g;
            k += 1;
        }
    }
    Ok(o)
}

/// Covariance matrix (`(q…, p…)` order, vacuum = 𝟙) of a zero-mean Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub sigma: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(m: usize) -> Self {
        Self {
            sigma: DMatrix::identity(2 * m, 2 * m),
        }
    }

    /// Product of squeezed vacua; `r > 0` squeezes `q`.
    pub fn squeezed(r: &[f64]) -> Self {
        let m = r.len();
        let mut sigma = DMatrix::zeros(2 * m, 2 * m);
        for (k, &rk) in r.iter().enumerate() {
            sigma[(k, k)] = (-2.0 * rk).exp();
            sigma[(m + k, m + k)] = (2.0 * rk).exp();
        }
        Self { sigma }
    }

    pub fn modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    /// Passive unitary with Heisenberg action `â → u â`.
    pub fn apply_passive(&self, u: &DMatrix<Complex64>) -> Self {
        let s = orthogonal_of(u);
        Self {
            sigma: &s * &self.sigma * s.transpose(),
        }
    }
}

/// Nullifier covariance for `δ_i = p_i − Σ_k V_ik q_k`, from a quadrature covariance matrix.
pub fn nullifier_variances_from_cov(sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = v.nrows();
    if sigma.nrows() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: sigma.nrows(),
        });
    }
    let mut c = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        c[(i, m + i)] = 1.0;
        for k in 0..m {
            c[(i, k)] = -v[(i, k)];
        }
    }
    let cov = &c * sigma * c.transpose();
    Ok((0..m).map(|i| cov[(i, i)]).collect())
}

/// `Var(δ_i)` for a Fock-space state.
pub fn nullifier_variances(state: &QuantumState, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_adjacency(v)?;
    if state.modes() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            got: state.modes(),
        });
    }
    let gens = build_generator_set(1, state.modes())?;
    let moments = state_moments(state, &gens)?;
    nullifier_variances_from_cov(&moments.cov, v)
}

/// Order-one covariance matrix of `A|ψ⟩/‖A|ψ⟩‖` for a zero-mean Gaussian `|ψ⟩` and
/// `A = Σ_k c_k â_k`, by Wick's theorem with `⟨ξ_a ξ_b⟩ = σ_ab + iΩ_ab`.
pub fn subtracted_covariance(sigma: &DMatrix<f64>, coeffs: &[Complex64]) -> Result<DMatrix<f64>> {
    let m = coeffs.len();
    if sigma.nrows() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: sigma.nrows(),
        });
    }
    let omega = symplectic_form(m);
    let g = DMatrix::from_fn(2 * m, 2 * m, |a, b| Complex64::new(sigma[(a, b)], omega[(a, b)]));
    let mut alpha = vec![Complex64::new(0.0, 0.0); 2 * m];
    for (k, &c) in coeffs.iter().enumerate() {
        alpha[k] = c * 0.5;
        alpha[m + k] = c * Complex64::new(0.0, 0.5);
    }
    let left: Vec<Complex64> = (0..2 * m)
        .map(|i| (0..2 * m).map(|a| alpha[a].conj() * g[(a, i)]).sum())
        .collect();
    let right: Vec<Complex64> = (0..2 * m)
        .map(|j| (0..2 * m).map(|d| g[(j, d)] * alpha[d]).sum())
        .collect();
    let norm: f64 = (0..2 * m).map(|a| (alpha[a].conj() * right[a]).re).sum();
    if norm < crate::fock::ops::SUBTRACTION_NORM_FLOOR {
        return Err(Error::VanishingSubtraction(norm.max(0.0).sqrt()));
    }
    Ok(DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        sigma[(i, j)] + (left[i] * right[j] + left[j] * right[i]).re / norm
    }))
}

#[derive(Debug, Clone)]
pub struct OptimizedCluster {
    pub o_free: DMatrix<f64>,
    pub angles: Vec<f64>,
    pub unitary: DMatrix<Complex64>,
    /// Covariance of the Gaussian cluster state.
    pub gaussian: GaussianState,
    pub variances: Vec<f64>,
    pub baseline_variances: Vec<f64>,
    pub optimizer: OptimizeResult,
}

/// Input covariance for the spec's squeezing levels (`dB < 0` squeezes `p`).
pub fn input_state(spec: &ClusterSpec) -> GaussianState {
    let r: Vec<f64> = spec.squeezing_db.iter().map(|&db| db_to_r(db)).collect();
    GaussianState::squeezed(&r)
}

fn nullifier_sum(spec_v: &DMatrix<f64>, input: &GaussianState, o: &DMatrix<f64>) -> f64 {
    let u = match cluster_unitary(spec_v, o) {
        Ok(u) => u,
        Err(_) => return f64::INFINITY,
    };
    let out = input.apply_passive(&u);
    nullifier_variances_from_cov(&out.sigma, spec_v)
        .map(|v| v.iter().sum())
        .unwrap_or(f64::INFINITY)
}

/// Minimizes `Σ Var(δ_i)` over the free orthogonal matrix.
pub fn optimize_cluster(spec: &ClusterSpec, cfg: &OptimizerConfig) -> Result<OptimizedCluster> {
    spec.validate()?;
    let m = spec.modes();
    let v = spec.adjacency_matrix();
    let input = input_state(spec);
    let k = m * (m - 1) / 2;
    let objective = |x: &[f64]| match givens_orthogonal(x, m) {
        Ok(o) => nullifier_sum(&v, &input, &o),
        Err(_) => f64::INFINITY,
    };
    let result = minimize(&objective, &Domain::angles(k), cfg)?;
    let o_free = givens_orthogonal(&result.x, m)?;
    let unitary = cluster_unitary(&v, &o_free)?;
    let gaussian = input.apply_passive(&unitary);
    let variances = nullifier_variances_from_cov(&gaussian.sigma, &v)?;
    let base_u = cluster_unitary(&v, &DMatrix::identity(m, m))?;
    let baseline_variances = nullifier_variances_from_cov(&input.apply_passive(&base_u).sigma, &v)?;
    Ok(OptimizedCluster {
        o_free,
        angles: result.x.clone(),
        unitary,
        gaussian,
        variances,
        baseline_variances,
        optimizer: result,
    })
}

/// Lower bound of `Σ Var(δ_i)` over all orthogonal `𝒪`: smallest input
/// variances paired with the largest eigenvalues of `𝟙 + V²`.
pub fn nullifier_sum_bound(spec: &ClusterSpec) -> f64 {
    let m = spec.modes();
    let v = spec.adjacency_matrix();
    let b = DMatrix::<f64>::identity(m, m) + &v * &v;
    let mut lam: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let mut d: Vec<f64> = spec.squeezing_db.iter().map(|&db| (2.0 * db_to_r(db)).exp()).collect();
    d.sort_by(f64::total_cmp);
    lam.iter().zip(&d).map(|(l, x)| l * x).sum()
}

/// Order-one covariance of the cluster after subtracting one photon from the designated node.
pub fn subtracted_cluster_covariance(cluster: &OptimizedCluster, spec: &ClusterSpec) -> Result<DMatrix<f64>> {
    let m = spec.modes();
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    c[spec.subtraction_mode] = Complex64::new(1.0, 0.0);
    subtracted_covariance(&cluster.gaussian.sigma, &c)
}

/// First-order witness of the photon-subtracted cluster for each partition.
pub fn cluster_witness_table(
    cluster: &OptimizedCluster,
    spec: &ClusterSpec,
    partitions: &[Partition],
    cfg: &OptimizerConfig,
    seeds: &[u64],
) -> Result<Vec<WitnessReport>> {
    let gens = build_generator_set(1, spec.modes())?;
    let cov = subtracted_cluster_covariance(cluster, spec)?;
    let q = &cov * 4.0;
    partitions
        .iter()
        .map(|p| {
            let problem = WitnessProblem::new(q.clone(), cov.clone(), &gens, p)?;
            mode_intrinsic_witness_multistart(&problem, cfg, seeds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trivial_graph_is_identity() {
        let v = DMatrix::zeros(3, 3);
        let u = cluster_unitary(&v, &DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!((u - DMatrix::<Complex64>::identity(3, 3)).camax(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn chain_unitary_is_unitary() {
        let v = named_graph("chain3").unwrap();
        let o = givens_orthogonal(&[0.3, -1.0, 2.2], 3).unwrap();
        let u = cluster_unitary(&v, &o).unwrap();
        assert!(unitarity_deviation(&u) < 1e-12);
    }

    #[test]
    fn vacuum_nullifiers_without_edges() {
        let g = GaussianState::vacuum(3);
        let v = nullifier_variances_from_cov(&g.sigma, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_adjacency() {
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 1)] = 1.0;
        assert!(cluster_unitary(&v, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn subtracting_from_vacuum_vanishes() {
        let g = GaussianState::vacuum(2);
        let c = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(subtracted_covariance(&g.sigma, &c), Err(Error::VanishingSubtraction(_))));
    }

    #[test]
    fn single_mode_subtracted_squeezed_variance() {
        // a S(r)|0⟩ ∝ S(r)|1⟩, whose quadrature variances are 3e^{∓2r}.
        let r: f64 = 0.4;
        let g = GaussianState::squeezed(&[r]);
        let cov = subtracted_covariance(&g.sigma, &[Complex64::new(1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(cov[(0, 0)], 3.0 * (-2.0 * r).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(1, 1)], 3.0 * (2.0 * r).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 1)], 0.0, epsilon = 1e-12);
    }
}
