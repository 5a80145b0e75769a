//! Homodyne marginals, sampling, classical Fisher information and the
//! measurement-setting-dependent witness.

pub mod fisher;
pub mod marginal;
pub mod sampling;
pub mod witness;

pub use fisher::{
    analytic_fisher, bootstrap_dataset, fit_even_polynomial, fit_quadratic, hellinger_distance_sq, hellinger_fisher_displacement,
    hellinger_fisher_simulated, hellinger_fisher_with, hellinger_replicates, FisherMatrix, FisherMethod,
    HellingerEstimate, KappaSchedule,
};
pub use marginal::{
    displacement_shifts, ensemble_marginal, evolve_ensemble, hermite_functions, marginal_distribution,
    parametrized_distribution, shift_probs, GridAxis, GridDistribution, MeasurementSetting,
};
pub use sampling::{sample, sample_stream, HomodyneDataset};
pub use witness::{
    default_settings, homodyne_problem, homodyne_witness, in_basis, HomodyneProblem, HomodyneWitnessReport,
};
