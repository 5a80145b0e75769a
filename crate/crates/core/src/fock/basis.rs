//! Multimode Fock basis truncated by total photon number.
//!
//! Basis vectors are occupation tuples `(n_1, ..., n_m)` with `Σ n_k ≤ cutoff`,
//! enumerated in lexicographic order (mode 1 most significant). Passive
//! interferometers, photon subtraction and loss all preserve or lower the total
//! photon number, so the space is closed under every channel in this crate.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    modes: usize,
    cutoff: usize,
    occupations: Vec<u16>,
    /// `completions[r][b]` = number of r-tuples with sum ≤ b.
    completions: Vec<Vec<usize>>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

impl FockBasis {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("modes must be ≥ 1".into()));
        }
        let dim = binomial(cutoff + modes, modes);
        if dim > 20_000_000 {
            return Err(Error::TooLarge(dim));
        }
        let completions = (0..=modes)
            .map(|r| (0..=cutoff).map(|b| binomial(b + r, r)).collect())
            .collect();
        let mut occupations = Vec::with_capacity(dim * modes);
        let mut current = vec![0u16; modes];
        fill(&mut occupations, &mut current, 0, cutoff);
        debug_assert_eq!(occupations.len(), dim * modes);
        Ok(Self {
            modes,
            cutoff,
            occupations,
            completions,
        })
    }

    pub fn shared(modes: usize, cutoff: usize) -> Result<Arc<Self>> {
        Self::new(modes, cutoff).map(Arc::new)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.modes
    }

    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.modes..(index + 1) * self.modes]
    }

    pub fn total(&self, index: usize) -> usize {
        self.occupation(index).iter().map(|&n| n as usize).sum()
    }

    /// Index of an occupation tuple, or `None` if it lies outside the truncation.
    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        debug_assert_eq!(occ.len(), self.modes);
        let mut budget = self.cutoff;
        let mut rank = 0usize;
        for (k, &n) in occ.iter().enumerate() {
            let n = n as usize;
            if n > budget {
                return None;
            }
            let rest = self.modes - k - 1;
            for v in 0..n {
                rank += self.completions[rest][budget - v];
            }
            budget -= n;
        }
        Some(rank)
    }

    /// Maps every index of `self` to its index in `larger` (which must have the
    /// same mode count and a cutoff at least as large).
    pub fn embedding_into(&self, larger: &FockBasis) -> Vec<usize> {
        assert_eq!(self.modes, larger.modes);
        assert!(larger.cutoff >= self.cutoff);
        (0..self.dim())
            .map(|i| larger.index_of(self.occupation(i)).expect("embedding"))
            .collect()
    }
}

fn fill(out: &mut Vec<u16>, current: &mut [u16], mode: usize, budget: usize) {
    if mode == current.len() {
        out.extend_from_slice(current);
        return;
    }
    for n in 0..=budget {
        current[mode] = n as u16;
        fill(out, current, mode + 1, budget - n);
    }
    current[mode] = 0;
}
