//! Truncated multimode Fock-space states, channels and quadrature moments.

pub mod basis;
pub mod moments;
pub mod ops;
pub mod spectral;
pub mod state;

pub use basis::FockBasis;
pub use moments::{
    apply_generators, expectation, expectation_ensemble, AppliedGenerators, MomentEngine, MOMENT_LIMIT,
};
pub use ops::{
    apply_loss, apply_passive_unitary, apply_passive_unitary_density, db_to_r, r_to_db,
    squeezed_vacuum, squeezed_vacuum_with_threshold, subtract_photon, subtract_photon_at_angles,
    subtraction_coefficients, vacuum_state, Subtracted,
};
pub use spectral::{spectral_decompose, to_ensemble};
pub use state::{DensityState, Ensemble, PureState, QuantumState};
