//! Gridded joint distributions of rotated-quadrature homodyne outcomes.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expectation, to_ensemble, Ensemble, FockBasis, MomentEngine, QuantumState};
use crate::generators::Generator;
use crate::witness::P_FLOOR;

/// Bin width of the default grid.
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
/// Half-width of the default grid.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
/// Smallest accepted number of bins per axis.
pub const MIN_BINS: usize = 64;
/// Largest accepted probability mass outside the grid.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Largest accepted number of grid cells.
pub const MAX_CELLS: usize = 1 << 24;
/// Photon headroom used when evolving states under a generator.
pub const EVOLVE_HEADROOM: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidParameter(format!("grid range [{min}, {max}]")));
        }
        if bins < MIN_BINS {
            return Err(Error::InvalidParameter(format!("{bins} bins, need at least {MIN_BINS}")));
        }
        Ok(Self { min, max, bins })
    }

    /// Symmetric grid `[−half, half]` with bins of width `width`.
    pub fn symmetric(half: f64, width: f64) -> Result<Self> {
        let bins = (2.0 * half / width).round() as usize;
        Self::new(-half, half, bins)
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.center(i)).collect()
    }

    /// Bin containing `x`, if inside the grid.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.min || x >= self.max {
            return None;
        }
        Some((((x - self.min) / self.width()) as usize).min(self.bins - 1))
    }
}

impl Default for GridAxis {
    fn default() -> Self {
        Self::symmetric(DEFAULT_HALF_WIDTH, DEFAULT_BIN_WIDTH).expect("default grid")
    }
}

/// Homodyne angles `φ_j ∈ [0, π)` measuring `cos φ_j q̂_j + sin φ_j p̂_j`, with
/// one grid axis per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub phi: Vec<f64>,
    pub grid: Vec<GridAxis>,
}

impl MeasurementSetting {
    pub fn new(phi: Vec<f64>, grid: Vec<GridAxis>) -> Result<Self> {
        if phi.is_empty() || phi.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.len(),
                got: grid.len(),
            });
        }
        if let Some(p) = phi.iter().find(|p| !(0.0..PI).contains(*p)) {
            return Err(Error::InvalidParameter(format!("homodyne angle {p} outside [0, π)")));
        }
        let s = Self { phi, grid };
        if s.cells() > MAX_CELLS {
            return Err(Error::TooLarge(s.cells()));
        }
        Ok(s)
    }

    /// Same angle grid on every mode.
    pub fn uniform(phi: Vec<f64>, axis: GridAxis) -> Result<Self> {
        let grid = vec![axis; phi.len()];
        Self::new(phi, grid)
    }

    /// All modes measured in `q̂`, default grid.
    pub fn position(modes: usize) -> Self {
        Self::uniform(vec![0.0; modes], GridAxis::default()).expect("valid setting")
    }

    /// All modes measured in `p̂`, default grid.
    pub fn momentum(modes: usize) -> Self {
        Self::uniform(vec![PI / 2.0; modes], GridAxis::default()).expect("valid setting")
    }

    /// Grid wide enough for `state`: at least the default half-width and at
    /// least eight standard deviations of every measured quadrature.
    pub fn adapted(state: &QuantumState, phi: Vec<f64>) -> Result<Self> {
        let m = state.modes();
        if phi.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: phi.len(),
            });
        }
        let mut grid = Vec::with_capacity(m);
        for (j, &f) in phi.iter().enumerate() {
            let (mean, var) = quadrature_moments(state, j, f)?;
            let reach = (mean.abs() + 8.0 * var.sqrt()).max(DEFAULT_HALF_WIDTH);
            let half = (reach / DEFAULT_BIN_WIDTH).ceil() * DEFAULT_BIN_WIDTH;
            grid.push(GridAxis::symmetric(half, DEFAULT_BIN_WIDTH)?);
        }
        Self::new(phi, grid)
    }

    pub fn modes(&self) -> usize {
        self.phi.len()
    }

    pub fn cells(&self) -> usize {
        self.grid.iter().map(|a| a.bins).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.iter().map(|a| a.width()).product()
    }

    /// Row-major strides, mode 0 slowest.
    pub fn strides(&self) -> Vec<usize> {
        let m = self.modes();
        let mut s = vec![1; m];
        for j in (0..m.saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.grid[j + 1].bins;
        }
        s
    }

    /// Flat cell index of per-mode bin indices.
    pub fn flat_index(&self, bins: &[usize]) -> usize {
        bins.iter().zip(self.strides()).map(|(b, s)| b * s).sum()
    }

    /// Per-mode bin indices of a flat cell index.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.modes()];
        for j in (0..self.modes()).rev() {
            out[j] = idx % self.grid[j].bins;
            idx /= self.grid[j].bins;
        }
        out
    }
}

fn quadrature_moments(state: &QuantumState, mode: usize, phi: f64) -> Result<(f64, f64)> {
    let m = state.modes();
    let mono = |a: u8, b: u8| {
        let mut e = vec![0u8; 2 * m];
        e[mode] = a;
        e[m + mode] = b;
        e
    };
    let (c, s) = (phi.cos(), phi.sin());
    let mq = expectation(state, &mono(1, 0))?;
    let mp = expectation(state, &mono(0, 1))?;
    let qq = expectation(state, &mono(2, 0))?;
    let pp = expectation(state, &mono(0, 2))?;
    let qp = expectation(state, &mono(1, 1))?;
    let mean = c * mq + s * mp;
    let second = c * c * qq + s * s * pp + 2.0 * c * s * qp;
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Discrete joint distribution over the cells of a setting's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution {
    pub setting: MeasurementSetting,
    /// Cell probabilities, row-major with mode 0 slowest; sums to one.
    pub probs: Vec<f64>,
    /// Probability mass lost outside the grid before renormalization.
    pub mass_defect: f64,
}

impl GridDistribution {
    /// Marginal of mode `j` on its axis.
    pub fn mode_marginal(&self, j: usize) -> Vec<f64> {
        let strides = self.setting.strides();
        let bins = self.setting.grid[j].bins;
        let mut out = vec![0.0; bins];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[(idx / strides[j]) % bins] += p;
        }
        out
    }

    /// Mean and variance of mode `j`'s outcome.
    pub fn mode_moments(&self, j: usize) -> (f64, f64) {
        let marg = self.mode_marginal(j);
        let xs = self.setting.grid[j].centers();
        let mean: f64 = marg.iter().zip(&xs).map(|(p, x)| p * x).sum();
        let var = marg.iter().zip(&xs).map(|(p, x)| p * (x - mean).powi(2)).sum();
        (mean, var)
    }
}

/// Hermite functions `⟨q = x|n⟩` for `n = 0..=n_max` in the convention with
/// vacuum variance one, as an `(n_max+1) × xs.len()` matrix.
pub fn hermite_functions(n_max: usize, xs: &[f64]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n_max + 1, xs.len());
    let norm0 = (2.0 * PI).powf(-0.25);
    for (c, &x) in xs.iter().enumerate() {
        let u = x / 2f64.sqrt();
        let mut prev = 0.0;
        let mut cur = norm0 * (-x * x / 4.0).exp();
        h[(0, c)] = cur;
        for n in 0..n_max {
            let next = (2.0 / (n + 1) as f64).sqrt() * u * cur - (n as f64 / (n + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
            h[(n + 1, c)] = cur;
        }
    }
    h
}

/// Per-mode matrices `M_j[x, n] = e^{−i n φ_j} ⟨q = x|n⟩`.
fn mode_kernels(setting: &MeasurementSetting, n_max: usize) -> Vec<DMatrix<Complex64>> {
    setting
        .phi
        .iter()
        .zip(&setting.grid)
        .map(|(&phi, axis)| {
            let h = hermite_functions(n_max, &axis.centers());
            DMatrix::from_fn(axis.bins, n_max + 1, |x, n| {
                Complex64::from_polar(h[(n, x)], -(n as f64) * phi)
            })
        })
        .collect()
}

/// `⟨ξ_φ = x|ψ⟩` on every grid cell.
fn wavefunction(basis: &FockBasis, amps: &[Complex64], kernels: &[DMatrix<Complex64>]) -> Vec<Complex64> {
    let m = basis.modes();
    let d = basis.cutoff() + 1;
    let mut tensor = vec![Complex64::new(0.0, 0.0); d.pow(m as u32)];
    for (idx, &a) in amps.iter().enumerate() {
        let flat = basis.occupation(idx).iter().fold(0, |acc, &n| acc * d + n as usize);
        tensor[flat] = a;
    }
    let mut shape: Vec<usize> = vec![d; m];
    for kernel in kernels {
        let lead = shape[0];
        let rest: usize = shape[1..].iter().product();
        let t = DMatrix::from_column_slice(rest, lead, &tensor);
        let y = kernel * t.transpose();
        tensor = y.as_slice().to_vec();
        shape.remove(0);
        shape.push(kernel.nrows());
    }
    tensor
}

/// Cell probabilities of an ensemble: `Δ^m Σ_k w_k |ψ_k(x)|²` at cell centers.
pub(crate) fn ensemble_density(ens: &Ensemble, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    check_modes(ens.modes(), setting)?;
    let kernels = mode_kernels(setting, ens.basis.cutoff());
    let vol = setting.cell_volume();
    let mut probs = vec![0.0; setting.cells()];
    for (w, v) in ens.weights.iter().zip(&ens.vectors) {
        let psi = wavefunction(&ens.basis, v, &kernels);
        for (p, a) in probs.iter_mut().zip(&psi) {
            *p += w * a.norm_sqr() * vol;
        }
    }
    Ok(probs)
}

/// Wavefunctions on the grid for vectors on `basis`.
pub(crate) fn wavefunctions(
    basis: &FockBasis,
    vectors: &[Vec<Complex64>],
    setting: &MeasurementSetting,
) -> Vec<Vec<Complex64>> {
    let kernels = mode_kernels(setting, basis.cutoff());
    vectors.iter().map(|v| wavefunction(basis, v, &kernels)).collect()
}

fn check_modes(m: usize, setting: &MeasurementSetting) -> Result<()> {
    if setting.modes() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: setting.modes(),
        });
    }
    Ok(())
}

fn normalize(setting: &MeasurementSetting, mut probs: Vec<f64>) -> Result<GridDistribution> {
    let mass: f64 = probs.iter().sum();
    let defect = 1.0 - mass;
    if defect > MASS_TOLERANCE {
        return Err(Error::GridTooSmall(defect));
    }
    probs.iter_mut().for_each(|p| *p /= mass);
    Ok(GridDistribution {
        setting: setting.clone(),
        probs,
        mass_defect: defect,
    })
}

pub fn ensemble_marginal(ens: &Ensemble, setting: &MeasurementSetting) -> Result<GridDistribution> {
    normalize(setting, ensemble_density(ens, setting)?)
}

/// Joint homodyne distribution of `state` in `setting`.
pub fn marginal_distribution(state: &QuantumState, setting: &MeasurementSetting) -> Result<GridDistribution> {
    ensemble_marginal(&to_ensemble(state, P_FLOOR)?, setting)
}

/// `exp(−i Σ_t c_t S(monomial_t))` applied to every ensemble component, on a
/// basis extended by [`EVOLVE_HEADROOM`] photons.
pub fn evolve_ensemble(ens: &Ensemble, terms: &[(&[u8], f64)]) -> Result<Ensemble> {
    let m = ens.modes();
    for (exps, _) in terms {
        if exps.len() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: exps.len(),
            });
        }
    }
    let mut engine = MomentEngine::new(ens.basis.clone(), EVOLVE_HEADROOM)?;
    engine.prepare(terms.iter().map(|(e, _)| *e));
    let ext: Arc<FockBasis> = engine.extended().clone();
    let top: Vec<usize> = (0..ext.dim()).filter(|&i| ext.total(i) + 2 > ext.cutoff()).collect();
    let mut vectors = Vec::with_capacity(ens.len());
    for v in &ens.vectors {
        let start = engine.embed(v);
        let mut sum = start.clone();
        let mut term = start;
        for k in 1..400 {
            let mut next = vec![Complex64::new(0.0, 0.0); ext.dim()];
            for (exps, c) in terms {
                let hv = engine.apply(exps, &term);
                let f = Complex64::new(0.0, -c / k as f64);
                for (n, h) in next.iter_mut().zip(hv) {
                    *n += f * h;
                }
            }
            term = next;
            let size: f64 = term.iter().map(|a| a.norm_sqr()).sum();
            sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
            if size < 1e-30 {
                break;
            }
        }
        let leak: f64 = top.iter().map(|&i| sum[i].norm_sqr()).sum();
        if leak > 1e-10 {
            return Err(Error::Leakage {
                leakage: leak,
                threshold: 1e-10,
            });
        }
        vectors.push(sum);
    }
    Ok(Ensemble {
        basis: ext,
        weights: ens.weights.clone(),
        vectors,
    })
}

/// Outcome shift of each mode produced by `exp(−iκ Ĥ)` for a first-order
/// generator: `p̂_j` moves `ξ_{φ_j}` by `2κ cos φ_j`, `q̂_j` by `−2κ sin φ_j`.
pub fn displacement_shifts(exps: &[u8], kappa: f64, phi: &[f64]) -> Result<Vec<f64>> {
    let m = phi.len();
    if exps.len() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: exps.len(),
        });
    }
    let order: usize = exps.iter().map(|&e| e as usize).sum();
    if order != 1 {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut s = vec![0.0; m];
    for j in 0..m {
        if exps[j] == 1 {
            s[j] = -2.0 * kappa * phi[j].sin();
        }
        if exps[m + j] == 1 {
            s[j] = 2.0 * kappa * phi[j].cos();
        }
    }
    Ok(s)
}

/// `p'(x) = p(x − s)` with per-mode shifts `s`, by linear interpolation
/// between bins; mass shifted in from outside the grid is zero.
pub fn shift_probs(probs: &[f64], setting: &MeasurementSetting, shifts: &[f64]) -> Vec<f64> {
    let strides = setting.strides();
    let mut cur = probs.to_vec();
    for (j, &s) in shifts.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let axis = &setting.grid[j];
        let bins = axis.bins as isize;
        let t = s / axis.width();
        let whole = t.floor();
        let frac = t - whole;
        let (whole, frac) = if frac > 1.0 - 1e-9 {
            (whole + 1.0, 0.0)
        } else if frac < 1e-9 {
            (whole, 0.0)
        } else {
            (whole, frac)
        };
        let whole = whole as isize;
        let stride = strides[j];
        let mut out = vec![0.0; cur.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = ((idx / stride) % axis.bins) as isize;
            let base = idx as isize - i * stride as isize;
            let fetch = |src: isize| {
                if (0..bins).contains(&src) {
                    cur[(base + src * stride as isize) as usize]
                } else {
                    0.0
                }
            };
            let src = i - whole;
            *o = (1.0 - frac) * fetch(src) + if frac > 0.0 { frac * fetch(src - 1) } else { 0.0 };
        }
        cur = out;
    }
    cur
}

/// Distribution after `exp(−iκ Ĥ)`: first-order generators shift the
/// distribution on the grid, second-order generators evolve the state.
pub fn parametrized_distribution(
    state: &QuantumState,
    generator: &Generator,
    kappa: f64,
    setting: &MeasurementSetting,
) -> Result<GridDistribution> {
    check_modes(state.modes(), setting)?;
    match generator.order() {
        1 => {
            let base = marginal_distribution(state, setting)?;
            let s = displacement_shifts(generator.exponents(), kappa, &setting.phi)?;
            Ok(GridDistribution {
                probs: shift_probs(&base.probs, setting, &s),
                ..base
            })
        }
        2 => {
            let ens = to_ensemble(state, P_FLOOR)?;
            let evolved = evolve_ensemble(&ens, &[(generator.exponents(), kappa)])?;
            ensemble_marginal(&evolved, setting)
        }
        n => Err(Error::UnsupportedOrder(n)),
    }
}
