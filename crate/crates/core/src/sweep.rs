//! Witness as a function of detection efficiency and preparation angle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_loss, PureState, QuantumState};
use crate::generators::{build_generator_set, Partition};
use crate::optimize::OptimizerConfig;
use crate::recipe::Recipe;
use crate::witness::{mode_intrinsic_witness, state_moments, WitnessProblem, WitnessReport, WITNESS_THRESHOLD};

/// `W_Q` of `state` at generator order `order`.
pub fn witness_of_state(
    state: &QuantumState,
    order: usize,
    partition: &Partition,
    cfg: &OptimizerConfig,
) -> Result<WitnessReport> {
    let gens = build_generator_set(order, state.modes())?;
    let moments = state_moments(state, &gens)?;
    mode_intrinsic_witness(&WitnessProblem::from_moments(&moments, partition)?, cfg)
}

/// `W_Q` after uniform loss `eta` on the pure state `psi`.
pub fn witness_at_eta(
    psi: &PureState,
    eta: f64,
    order: usize,
    partition: &Partition,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    let state: QuantumState = if eta == 1.0 {
        psi.clone().into()
    } else {
        apply_loss(&psi.clone().into(), &vec![eta; psi.modes()])?.into()
    };
    Ok(witness_of_state(&state, order, partition, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub angle: f64,
    pub eta: f64,
    pub value: f64,
}

/// `W_Q` on the grid `angles × etas`, varying the first angle of
/// subtraction `index` of `recipe`. Rows are ordered by angle, then `eta`.
pub fn loss_sweep(
    recipe: &Recipe,
    index: usize,
    angles: &[f64],
    etas: &[f64],
    order: usize,
    partition: &Partition,
    cfg: &OptimizerConfig,
) -> Result<Vec<SweepPoint>> {
    let states = angles
        .iter()
        .map(|&a| recipe.with_subtraction_angle(index, a)?.build_lossless())
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..angles.len())
        .flat_map(|i| etas.iter().map(move |&e| (i, e)))
        .collect();
    jobs.par_iter()
        .map(|&(i, eta)| {
            Ok(SweepPoint {
                angle: angles[i],
                eta,
                value: witness_at_eta(&states[i], eta, order, partition, cfg)?,
            })
        })
        .collect()
}

/// Where the witness stops detecting entanglement along decreasing `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CriticalEta {
    /// Not witnessed even without loss.
    NeverWitnessed,
    /// Witnessed for `eta` above the value, within the bisection tolerance.
    At(f64),
    /// Still witnessed at the lowest efficiency probed.
    Below(f64),
}

impl CriticalEta {
    /// Critical efficiency, with 1 for states never witnessed and the probe
    /// floor for states witnessed throughout.
    pub fn value(&self) -> f64 {
        match *self {
            Self::NeverWitnessed => 1.0,
            Self::At(e) | Self::Below(e) => e,
        }
    }
}

/// Bisects the sign change of `w(eta)` on `[eta_min, 1]`, assuming the
/// witness decreases with loss.
pub fn critical_eta<F>(w: F, eta_min: f64, tol: f64) -> Result<CriticalEta>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(0.0..1.0).contains(&eta_min) || !(tol > 0.0) {
        return Err(Error::InvalidParameter("need 0 ≤ eta_min < 1 and tol > 0".into()));
    }
    let positive = |e: f64| -> Result<bool> { Ok(w(e)? > WITNESS_THRESHOLD) };
    if !positive(1.0)? {
        return Ok(CriticalEta::NeverWitnessed);
    }
    if positive(eta_min)? {
        return Ok(CriticalEta::Below(eta_min));
    }
    let (mut lo, mut hi) = (eta_min, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalEta::At(0.5 * (lo + hi)))
}
