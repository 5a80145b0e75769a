//! Witness built from classical Fisher matrices of homodyne settings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fisher::{analytic_fisher, FisherMatrix};
use super::marginal::MeasurementSetting;
use crate::error::{Error, Result};
use crate::fock::{apply_passive_unitary, apply_passive_unitary_density, QuantumState};
use crate::generators::{GeneratorSet, Partition};
use crate::mode_basis::{parameter_count, BasisChange};
use crate::optimize::{minimize, Domain, OptimizerConfig};
use crate::witness::{state_moments, WitnessProblem, WITNESS_THRESHOLD};

/// `E_hom(φ, ϑ | ϑ₀)` for a list of settings, each with its Fisher matrix
/// measured in `ϑ₀`.
#[derive(Debug, Clone)]
pub struct HomodyneProblem {
    problems: Vec<WitnessProblem>,
}

impl HomodyneProblem {
    pub fn new(fishers: &[DMatrix<f64>], gamma: &DMatrix<f64>, gens: &GeneratorSet, partition: &Partition) -> Result<Self> {
        if fishers.is_empty() {
            return Err(Error::InvalidParameter("empty list of measurement settings".into()));
        }
        let problems = fishers
            .iter()
            .map(|f| WitnessProblem::new(f.clone(), gamma.clone(), gens, partition))
            .collect::<Result<_>>()?;
        Ok(Self { problems })
    }

    fn first(&self) -> &WitnessProblem {
        &self.problems[0]
    }

    pub fn modes(&self) -> usize {
        self.first().modes()
    }

    pub fn settings(&self) -> usize {
        self.problems.len()
    }

    /// `E_hom` of each setting at `ϑ = params`.
    pub fn per_setting(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.problems.iter().map(|p| p.evaluate_params(params)).collect()
    }

    /// Best setting at `ϑ = params`.
    pub fn evaluate_params(&self, params: &[f64]) -> Result<f64> {
        Ok(self.per_setting(params)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomodyneWitnessReport {
    pub partition: String,
    pub order: usize,
    /// Refined `W_hom`.
    pub value: f64,
    pub sampled_value: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `E_hom` of each setting at the minimizing basis.
    pub per_setting: Vec<f64>,
    pub witnessed: bool,
    pub converged: bool,
    pub evaluations: usize,
}

/// `W_hom = min_ϑ max_settings E_hom`.
pub fn homodyne_witness(problem: &HomodyneProblem, cfg: &OptimizerConfig) -> Result<HomodyneWitnessReport> {
    let m = problem.modes();
    let k = parameter_count(m);
    let objective = |x: &[f64]| problem.evaluate_params(x).unwrap_or(f64::INFINITY);
    let r = minimize(&objective, &Domain::angles(2 * k), cfg)?;
    let first = problem.first();
    Ok(HomodyneWitnessReport {
        partition: first.partition().to_string(),
        order: first.gens().max_order(),
        value: r.value,
        sampled_value: r.sampled_value,
        theta: r.x[..k].to_vec(),
        phi: r.x[k..].to_vec(),
        per_setting: problem.per_setting(&r.x)?,
        witnessed: r.value > WITNESS_THRESHOLD,
        converged: r.converged,
        evaluations: r.evaluations,
    })
}

/// `(q, …, q)` and `(p, …, p)` settings with grids adapted to `state`.
pub fn default_settings(state: &QuantumState) -> Result<Vec<MeasurementSetting>> {
    let m = state.modes();
    Ok(vec![
        MeasurementSetting::adapted(state, vec![0.0; m])?,
        MeasurementSetting::adapted(state, vec![std::f64::consts::FRAC_PI_2; m])?,
    ])
}

/// `state` expressed in the mode basis `basis0`.
pub fn in_basis(state: &QuantumState, basis0: &BasisChange) -> Result<QuantumState> {
    if basis0.params().iter().all(|&x| x == 0.0) {
        return Ok(state.clone());
    }
    let u = basis0.mode_unitary();
    Ok(match state {
        QuantumState::Pure(s) => apply_passive_unitary(s, &u)?.into(),
        QuantumState::Mixed(r) => apply_passive_unitary_density(r, &u)?.into(),
    })
}

/// Exact Fisher matrices for `settings` and the covariance matrix, both in
/// `basis0`, assembled into a witness problem.
pub fn homodyne_problem(
    state: &QuantumState,
    gens: &GeneratorSet,
    partition: &Partition,
    settings: &[MeasurementSetting],
    basis0: &BasisChange,
) -> Result<(HomodyneProblem, Vec<FisherMatrix>)> {
    let rotated = in_basis(state, basis0)?;
    let fishers = settings
        .iter()
        .map(|s| analytic_fisher(&rotated, gens, s))
        .collect::<Result<Vec<_>>>()?;
    let gamma = state_moments(&rotated, gens)?.cov;
    let mats: Vec<DMatrix<f64>> = fishers.iter().map(|f| f.values.clone()).collect();
    Ok((HomodyneProblem::new(&mats, &gamma, gens, partition)?, fishers))
}
