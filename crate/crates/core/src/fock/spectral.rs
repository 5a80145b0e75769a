use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::{hermiticity_deviation, DensityState, Ensemble, QuantumState};
use crate::error::{Error, Result};

/// Eigenpairs of a density matrix with eigenvalue `≥ p_floor`, sorted by
/// descending eigenvalue.
pub fn spectral_decompose(rho: &DensityState, p_floor: f64) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let m: &DMatrix<Complex64> = rho.matrix();
    let dev = hermiticity_deviation(m);
    if dev > 1e-9 {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<Complex64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= p_floor)
        .map(|(k, &p)| (p, eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

/// Ensemble form of a state. Pure states give a single component; mixed states
/// keep eigencomponents with weight `≥ p_floor`.
pub fn to_ensemble(state: &QuantumState, p_floor: f64) -> Result<Ensemble> {
    match state {
        QuantumState::Pure(p) => Ok(Ensemble::pure(p)),
        QuantumState::Mixed(d) => {
            let pairs = spectral_decompose(d, p_floor)?;
            let (weights, vectors) = pairs.into_iter().unzip();
            Ok(Ensemble {
                basis: d.basis().clone(),
                weights,
                vectors,
            })
        }
    }
}
