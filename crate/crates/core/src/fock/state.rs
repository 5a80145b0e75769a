use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::FockBasis;
use crate::error::{Error, Result};

pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-10;

/// Largest Hilbert-space dimension for which a dense density matrix is built.
pub const MAX_DENSITY_DIM: usize = 2048;

/// Pure state on a total-photon-truncated multimode Fock space.
#[derive(Debug, Clone)]
pub struct PureState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
    norm_tolerance: f64,
}

impl PureState {
    /// Wraps amplitudes, normalizing them. Fails on a zero vector.
    pub fn from_amplitudes(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        let mut state = Self {
            basis,
            amplitudes,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        };
        let n = state.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("state has zero norm".into()));
        }
        state.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(state)
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            basis,
            amplitudes,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }

    /// Fock state with the given occupation numbers.
    pub fn number_state(basis: Arc<FockBasis>, occ: &[u16]) -> Result<Self> {
        let idx = basis
            .index_of(occ)
            .ok_or_else(|| Error::InvalidParameter(format!("{occ:?} exceeds the cutoff")))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(Self {
            basis,
            amplitudes,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        })
    }

    pub(crate) fn from_normalized(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Self {
        Self {
            basis,
            amplitudes,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn cutoff(&self) -> usize {
        self.basis.cutoff()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occ: &[u16]) -> Complex64 {
        self.basis
            .index_of(occ)
            .map(|i| self.amplitudes[i])
            .unwrap_or_default()
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= self.norm_tolerance
    }

    /// Probability in the two highest total-photon layers. Two layers because
    /// parity-definite states leave every other layer empty.
    pub fn leakage(&self) -> f64 {
        let c = self.cutoff();
        (0..self.basis.dim())
            .filter(|&i| self.basis.total(i) + 1 >= c)
            .map(|i| self.amplitudes[i].norm_sqr())
            .sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.basis.dim())
            .map(|i| self.basis.total(i) as f64 * self.amplitudes[i].norm_sqr())
            .sum()
    }

    /// Amplitudes re-expressed on a basis with a larger cutoff.
    pub fn embedded(&self, larger: &Arc<FockBasis>) -> Vec<Complex64> {
        let map = self.basis.embedding_into(larger);
        let mut out = vec![Complex64::new(0.0, 0.0); larger.dim()];
        for (i, &j) in map.iter().enumerate() {
            out[j] = self.amplitudes[i];
        }
        out
    }

    pub fn to_density(&self) -> Result<DensityState> {
        let d = self.basis.dim();
        if d > MAX_DENSITY_DIM {
            return Err(Error::TooLarge(d));
        }
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        Ok(DensityState {
            basis: self.basis.clone(),
            matrix: &v * v.adjoint(),
        })
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Mixed state on a total-photon-truncated Fock space.
#[derive(Debug, Clone)]
pub struct DensityState {
    basis: Arc<FockBasis>,
    matrix: DMatrix<Complex64>,
}

impl DensityState {
    pub fn new(basis: Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows(),
            });
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-9 {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { basis, matrix })
    }

    pub(crate) fn from_parts(basis: Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Self {
        Self { basis, matrix }
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let d = basis.dim();
        let mut matrix = DMatrix::zeros(d, d);
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { basis, matrix }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn cutoff(&self) -> usize {
        self.basis.cutoff()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.basis.dim())
            .map(|i| self.basis.total(i) as f64 * self.matrix[(i, i)].re)
            .sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

pub(crate) fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Either representation; channels that mix a pure state return `Mixed`.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityState),
}

impl QuantumState {
    pub fn basis(&self) -> &Arc<FockBasis> {
        match self {
            Self::Pure(s) => s.basis(),
            Self::Mixed(s) => s.basis(),
        }
    }

    pub fn modes(&self) -> usize {
        self.basis().modes()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure(_))
    }
}

impl From<PureState> for QuantumState {
    fn from(s: PureState) -> Self {
        Self::Pure(s)
    }
}

impl From<DensityState> for QuantumState {
    fn from(s: DensityState) -> Self {
        Self::Mixed(s)
    }
}

/// Weighted orthonormal pure components `ρ = Σ_k p_k |ψ_k⟩⟨ψ_k|`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub basis: Arc<FockBasis>,
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

impl Ensemble {
    pub fn pure(state: &PureState) -> Self {
        Self {
            basis: state.basis().clone(),
            weights: vec![1.0],
            vectors: vec![state.amplitudes().to_vec()],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn is_pure(&self) -> bool {
        self.weights.len() == 1 && (self.weights[0] - 1.0).abs() < 1e-12
    }
}
