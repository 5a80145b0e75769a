//! JSON state recipes: squeezed inputs, an optional interferometer, photon
//! subtractions and loss; or a photon-subtracted cluster.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cluster::{named_graph, ClusterSpec};
use crate::error::{Error, Result};
use crate::fock::{
    apply_loss, apply_passive_unitary, db_to_r, squeezed_vacuum_with_threshold, subtract_photon_at_angles, PureState, QuantumState,
};
use crate::mode_basis::clements_orthogonal;

fn default_leakage() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Interferometer {
    Identity,
    /// Mesh angles in the mode-basis parametrization.
    Clements { theta: Vec<f64>, phi: Vec<f64> },
    /// Explicit mode unitary as real and imaginary parts.
    Unitary { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

impl Interferometer {
    pub fn mode_unitary(&self, modes: usize) -> Result<DMatrix<Complex64>> {
        match self {
            Self::Identity => Ok(DMatrix::identity(modes, modes)),
            Self::Clements { theta, phi } => Ok(clements_orthogonal(theta, phi, modes)?.mode_unitary()),
            Self::Unitary { re, im } => {
                if re.len() != modes || im.len() != modes || re.iter().chain(im).any(|r| r.len() != modes) {
                    return Err(Error::DimensionMismatch {
                        expected: modes,
                        got: re.len(),
                    });
                }
                Ok(DMatrix::from_fn(modes, modes, |r, c| Complex64::new(re[r][c], im[r][c])))
            }
        }
    }
}

/// One photon subtraction along hyperspherical angles (`m − 1` of them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtraction {
    pub angles: Vec<f64>,
}

/// Photon-subtracted cluster; squeezing comes from the recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterRecipe {
    #[serde(default)]
    pub graph: Option<String>,
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<f64>>>,
    /// 0-based node that loses a photon.
    #[serde(default)]
    pub subtraction_mode: usize,
}

/// Grid for loss sweeps: efficiencies and values of one subtraction angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub eta: Vec<f64>,
    /// Index of the subtraction whose first angle is varied.
    pub subtraction: usize,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default)]
    pub name: Option<String>,
    pub modes: usize,
    #[serde(default)]
    pub cutoff: usize,
    #[serde(default)]
    pub squeezing_db: Option<Vec<f64>>,
    #[serde(default)]
    pub squeezing_r: Option<Vec<f64>>,
    #[serde(default)]
    pub interferometer: Option<Interferometer>,
    #[serde(default)]
    pub subtractions: Vec<Subtraction>,
    /// Per-mode efficiencies; absent means lossless.
    #[serde(default)]
    pub loss_eta: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_leakage")]
    pub leakage_threshold: f64,
    #[serde(default)]
    pub cluster: Option<ClusterRecipe>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

impl Recipe {
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_cluster(&self) -> bool {
        self.cluster.is_some()
    }

    /// Squeezing parameters `r` (positive squeezes `q`).
    pub fn squeezing(&self) -> Result<Vec<f64>> {
        match (&self.squeezing_db, &self.squeezing_r) {
            (Some(_), Some(_)) => Err(Error::InvalidParameter(
                "give squeezing_db or squeezing_r, not both".into(),
            )),
            (Some(db), None) => Ok(db.iter().map(|&d| db_to_r(d)).collect()),
            (None, Some(r)) => Ok(r.clone()),
            (None, None) => Ok(vec![0.0; self.modes]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modes;
        if m == 0 {
            return Err(Error::InvalidParameter("recipe needs at least one mode".into()));
        }
        let r = self.squeezing()?;
        if r.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.len(),
            });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite squeezing".into()));
        }
        for s in &self.subtractions {
            if s.angles.len() + 1 != m {
                return Err(Error::DimensionMismatch {
                    expected: m - 1,
                    got: s.angles.len(),
                });
            }
        }
        if let Some(eta) = &self.loss_eta {
            check_eta(eta, m)?;
        }
        if !(self.leakage_threshold > 0.0) {
            return Err(Error::InvalidParameter("leakage threshold must be positive".into()));
        }
        if let Some(c) = &self.cluster {
            if !self.subtractions.is_empty() || self.interferometer.is_some() {
                return Err(Error::InvalidParameter(
                    "cluster recipes take no interferometer or subtraction list".into(),
                ));
            }
            self.cluster_spec_of(c)?.validate()?;
        } else if self.cutoff < 2 {
            return Err(Error::InvalidParameter(format!("cutoff {} < 2", self.cutoff)));
        }
        if let Some(s) = &self.sweep {
            if s.subtraction >= self.subtractions.len() {
                return Err(Error::InvalidParameter(format!("sweep varies missing subtraction {}", s.subtraction)));
            }
            check_eta(&s.eta, s.eta.len())?;
        }
        Ok(())
    }

    fn cluster_spec_of(&self, c: &ClusterRecipe) -> Result<ClusterSpec> {
        let adjacency = match (&c.graph, &c.adjacency) {
            (Some(name), None) => {
                let v = named_graph(name)?;
                (0..v.nrows()).map(|r| v.row(r).iter().copied().collect()).collect()
            }
            (None, Some(a)) => a.clone(),
            _ => {
                return Err(Error::InvalidParameter(
                    "cluster needs exactly one of graph and adjacency".into(),
                ))
            }
        };
        let squeezing_db = match (&self.squeezing_db, &self.squeezing_r) {
            (Some(db), None) => db.clone(),
            _ => return Err(Error::InvalidParameter("cluster recipes use squeezing_db".into())),
        };
        let spec = ClusterSpec {
            adjacency,
            squeezing_db,
            subtraction_mode: c.subtraction_mode,
        };
        if spec.modes() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                got: spec.modes(),
            });
        }
        Ok(spec)
    }

    pub fn cluster_spec(&self) -> Result<ClusterSpec> {
        match &self.cluster {
            Some(c) => self.cluster_spec_of(c),
            None => Err(Error::InvalidParameter("recipe is not a cluster".into())),
        }
    }

    /// The state before the loss channel.
    pub fn build_lossless(&self) -> Result<PureState> {
        self.validate()?;
        if self.is_cluster() {
            return Err(Error::InvalidParameter(
                "cluster recipes are evaluated through their covariance matrix".into(),
            ));
        }
        let mut psi = squeezed_vacuum_with_threshold(&self.squeezing()?, self.cutoff, self.leakage_threshold)?;
        if let Some(i) = &self.interferometer {
            psi = apply_passive_unitary(&psi, &i.mode_unitary(self.modes)?)?;
        }
        for s in &self.subtractions {
            psi = subtract_photon_at_angles(&psi, &s.angles)?.state;
        }
        Ok(psi)
    }

    /// Builds the Fock-space state.
    pub fn build_state(&self) -> Result<QuantumState> {
        let psi = self.build_lossless()?;
        match &self.loss_eta {
            Some(eta) if eta.iter().any(|&e| e != 1.0) => Ok(apply_loss(&psi.into(), eta)?.into()),
            _ => Ok(psi.into()),
        }
    }

    /// Copy with uniform efficiency `eta` on every mode.
    pub fn with_eta(&self, eta: f64) -> Self {
        Self {
            loss_eta: Some(vec![eta; self.modes]),
            ..self.clone()
        }
    }

    /// Copy with the first angle of subtraction `index` replaced.
    pub fn with_subtraction_angle(&self, index: usize, angle: f64) -> Result<Self> {
        let mut out = self.clone();
        let s = out
            .subtractions
            .get_mut(index)
            .ok_or_else(|| Error::InvalidParameter(format!("no subtraction {index}")))?;
        match s.angles.first_mut() {
            Some(a) => *a = angle,
            None => return Err(Error::InvalidParameter("single-mode subtraction has no angle".into())),
        }
        Ok(out)
    }
}

fn check_eta(eta: &[f64], m: usize) -> Result<()> {
    if eta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: eta.len(),
        });
    }
    if let Some(e) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidParameter(format!("efficiency {e} outside [0, 1]")));
    }
    Ok(())
}
