//! Symmetrized quadrature generators, their canonical ordering and locality.
//!
//! A generator is an exponent tuple `(k_q1 … k_qm, k_p1 … k_pm)` standing for
//! `S(q₁^{k_q1} ⋯ p_m^{k_pm})`. Sets are ordered by ascending total order and,
//! within one order, by descending lexicographic order of the exponent tuple.
//! The first-order block is therefore `q₁ … q_m, p₁ … p_m`, the same index
//! order as the quadrature vector.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest generator order supported by the lift and moment code.
pub const MAX_GENERATOR_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Generator {
    exponents: Vec<u8>,
}

impl Generator {
    pub fn new(exponents: Vec<u8>) -> Result<Self> {
        if exponents.is_empty() || exponents.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "exponent tuple of length {} is not 2m",
                exponents.len()
            )));
        }
        if exponents.iter().all(|&k| k == 0) {
            return Err(Error::InvalidParameter("generator of order 0".into()));
        }
        Ok(Self { exponents })
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exponents
    }

    pub fn modes(&self) -> usize {
        self.exponents.len() / 2
    }

    pub fn order(&self) -> usize {
        self.exponents.iter().map(|&k| k as usize).sum()
    }

    /// Modes (0-based) on which the generator acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        let m = self.modes();
        (0..m)
            .filter(|&k| self.exponents[k] > 0 || self.exponents[m + k] > 0)
            .collect()
    }

    /// Parses the text form, e.g. `"q1^2 p2"`, for an `m`-mode system.
    pub fn parse(text: &str, modes: usize) -> Result<Self> {
        let mut exps = vec![0u8; 2 * modes];
        let bad = || Error::Parse(format!("invalid generator '{text}'"));
        for token in text.split(|c: char| c.is_whitespace() || c == '*').filter(|t| !t.is_empty()) {
            let (head, power) = match token.split_once('^') {
                Some((h, p)) => (h, p.parse::<u8>().map_err(|_| bad())?),
                None => (token, 1),
            };
            let kind = head.chars().next().ok_or_else(bad)?;
            let mode: usize = head[1..].parse().map_err(|_| bad())?;
            if mode == 0 || mode > modes {
                return Err(bad());
            }
            let slot = match kind {
                'q' => mode - 1,
                'p' => modes + mode - 1,
                _ => return Err(bad()),
            };
            exps[slot] = exps[slot].checked_add(power).ok_or_else(bad)?;
        }
        Self::new(exps)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.modes();
        let mut parts = Vec::new();
        for (slot, &k) in self.exponents.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let (c, mode) = if slot < m { ('q', slot + 1) } else { ('p', slot - m + 1) };
            if k == 1 {
                parts.push(format!("{c}{mode}"));
            } else {
                parts.push(format!("{c}{mode}^{k}"));
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Disjoint blocks of 0-based mode indices covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    modes: usize,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, modes: usize) -> Result<Self> {
        let mut seen = vec![false; modes];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &k in block {
                if k >= modes {
                    return Err(Error::InvalidPartition(format!("mode {} out of range", k + 1)));
                }
                if seen[k] {
                    return Err(Error::InvalidPartition(format!("mode {} repeated", k + 1)));
                }
                seen[k] = true;
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("mode {} not covered", k + 1)));
        }
        Ok(Self { blocks, modes })
    }

    pub fn singletons(modes: usize) -> Self {
        Self {
            blocks: (0..modes).map(|k| vec![k]).collect(),
            modes,
        }
    }

    pub fn single_block(modes: usize) -> Self {
        Self {
            blocks: vec![(0..modes).collect()],
            modes,
        }
    }

    /// Parses `"1|2|3"`, `"12|3"` or `"1,2|3"` (1-based modes). Digits run
    /// together denote separate single-digit modes.
    pub fn parse(text: &str, modes: usize) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.split('|') {
            let part = part.trim();
            let items: Vec<usize> = if part.contains(',') {
                part.split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidPartition(text.into()))?
            } else {
                part.chars()
                    .map(|c| c.to_digit(10).map(|d| d as usize))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::InvalidPartition(text.into()))?
            };
            if items.iter().any(|&k| k == 0) {
                return Err(Error::InvalidPartition(format!("{text}: modes are 1-based")));
            }
            blocks.push(items.into_iter().map(|k| k - 1).collect());
        }
        Self::new(blocks, modes)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn block_of(&self, mode: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&mode))
    }

    /// Block sizes in descending order. Partitions with equal shapes are
    /// related by a mode relabeling, which is itself a passive basis change.
    pub fn shape(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.blocks.iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// `true` if every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.blocks.iter().all(|b| {
            let target = coarser.block_of(b[0]);
            b.iter().all(|&k| coarser.block_of(k) == target)
        })
    }

    /// One representative partition per shape, e.g. `1|2|3` and `12|3` for three modes.
    pub fn all_shapes(modes: usize) -> Vec<Partition> {
        fn rec(remaining: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if remaining == 0 {
                out.push(cur.clone());
                return;
            }
            for s in (1..=remaining.min(max)).rev() {
                cur.push(s);
                rec(remaining - s, s, cur, out);
                cur.pop();
            }
        }
        let mut shapes = Vec::new();
        rec(modes, modes, &mut Vec::new(), &mut shapes);
        shapes
            .into_iter()
            .filter(|s| s.len() > 1)
            .map(|s| {
                let mut start = 0;
                let blocks = s
                    .iter()
                    .map(|&len| {
                        let b: Vec<usize> = (start..start + len).collect();
                        start += len;
                        b
                    })
                    .collect();
                Partition { blocks, modes }
            })
            .collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.modes > 9;
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let labels: Vec<String> = b.iter().map(|k| (k + 1).to_string()).collect();
                labels.join(if wide { "," } else { "" })
            })
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// Drops repeated partitions that differ only by mode relabeling, keeping the first of each shape.
pub fn dedup_partitions(parts: &[Partition]) -> Vec<Partition> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for p in parts {
        let s = p.shape();
        if !seen.contains(&s) {
            seen.push(s);
            out.push(p.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Local(usize),
    NonLocal,
}

pub fn locality_of(g: &Generator, partition: &Partition) -> Result<Locality> {
    if g.modes() != partition.modes() {
        return Err(Error::InvalidPartition(format!(
            "partition over {} modes, generator over {}",
            partition.modes(),
            g.modes()
        )));
    }
    let support = g.support();
    let first = partition.block_of(support[0]).expect("covering partition");
    if support.iter().all(|&k| partition.block_of(k) == Some(first)) {
        Ok(Locality::Local(first))
    } else {
        Ok(Locality::NonLocal)
    }
}

/// `ℓ(N, m) = Σ_{k=1}^{N} C(2m+k−1, k)`.
pub fn full_count(order: usize, modes: usize) -> usize {
    (1..=order).map(|k| binomial(2 * modes + k - 1, k)).sum()
}

/// `ℓ_loc(N, m) = m·N·(N+3)/2`, the local count for the all-singletons partition.
pub fn local_count(order: usize, modes: usize) -> usize {
    modes * order * (order + 3) / 2
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorSetRepr", into = "GeneratorSetRepr")]
pub struct GeneratorSet {
    modes: usize,
    max_order: usize,
    generators: Vec<Generator>,
    index: HashMap<Vec<u8>, usize>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorSetRepr {
    modes: usize,
    max_order: usize,
    generators: Vec<String>,
}

impl From<GeneratorSet> for GeneratorSetRepr {
    fn from(s: GeneratorSet) -> Self {
        Self {
            modes: s.modes,
            max_order: s.max_order,
            generators: s.labels(),
        }
    }
}

impl TryFrom<GeneratorSetRepr> for GeneratorSet {
    type Error = Error;

    fn try_from(r: GeneratorSetRepr) -> Result<Self> {
        let set = build_generator_set(r.max_order, r.modes)?;
        let parsed: Vec<Generator> = r
            .generators
            .iter()
            .map(|t| Generator::parse(t, r.modes))
            .collect::<Result<_>>()?;
        if parsed != set.generators {
            return Err(Error::Parse("generator list is not in canonical order".into()));
        }
        Ok(set)
    }
}

/// All generators of order `1..=order` on `modes` modes, canonically ordered.
pub fn build_generator_set(order: usize, modes: usize) -> Result<GeneratorSet> {
    if order == 0 || modes == 0 {
        return Err(Error::InvalidParameter("order and modes must be ≥ 1".into()));
    }
    if order > MAX_GENERATOR_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut generators = Vec::with_capacity(full_count(order, modes));
    for n in 1..=order {
        let mut cur = vec![0u8; 2 * modes];
        enumerate(&mut cur, 0, n, &mut generators);
    }
    let index = generators
        .iter()
        .enumerate()
        .map(|(i, g)| (g.exponents.clone(), i))
        .collect();
    Ok(GeneratorSet {
        modes,
        max_order: order,
        generators,
        index,
    })
}

fn enumerate(cur: &mut [u8], slot: usize, remaining: usize, out: &mut Vec<Generator>) {
    if slot == cur.len() - 1 {
        cur[slot] = remaining as u8;
        out.push(Generator {
            exponents: cur.to_vec(),
        });
        cur[slot] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[slot] = k as u8;
        enumerate(cur, slot + 1, remaining - k, out);
    }
    cur[slot] = 0;
}

impl GeneratorSet {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn get(&self, i: usize) -> &Generator {
        &self.generators[i]
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    /// Index range of the generators with exactly this order.
    pub fn order_range(&self, order: usize) -> std::ops::Range<usize> {
        let start = full_count(order - 1, self.modes);
        start..full_count(order, self.modes)
    }

    pub fn labels(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.to_string()).collect()
    }

    pub fn locality(&self, partition: &Partition) -> Result<Vec<Locality>> {
        self.generators.iter().map(|g| locality_of(g, partition)).collect()
    }

    /// Indices of generators local to some block, in set order.
    pub fn local_indices(&self, partition: &Partition) -> Result<Vec<usize>> {
        Ok(self
            .locality(partition)?
            .into_iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Locality::Local(_)))
            .map(|(i, _)| i)
            .collect())
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses with the mode count inferred as the largest label.
    fn from_str(s: &str) -> Result<Self> {
        let modes = s
            .split(|c: char| c == '|' || c == ',')
            .flat_map(|part| {
                if s.contains(',') {
                    vec![part.trim().parse::<usize>().unwrap_or(0)]
                } else {
                    part.chars().filter_map(|c| c.to_digit(10)).map(|d| d as usize).collect()
                }
            })
            .max()
            .unwrap_or(0);
        Self::parse(s, modes)
    }
}
