//! Seeded multinomial sampling of homodyne histograms and their CSV form.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::marginal::{GridAxis, GridDistribution, MeasurementSetting};
use crate::error::{Error, Result};

/// Histogram of homodyne outcomes over a setting's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneDataset {
    pub setting: MeasurementSetting,
    /// Counts per cell, same layout as [`GridDistribution::probs`].
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub seed: u64,
}

impl HomodyneDataset {
    pub fn new(setting: MeasurementSetting, counts: Vec<u64>, seed: u64) -> Result<Self> {
        if counts.len() != setting.cells() {
            return Err(Error::DimensionMismatch {
                expected: setting.cells(),
                got: counts.len(),
            });
        }
        let n_samples = counts.iter().sum();
        if n_samples == 0 {
            return Err(Error::InvalidParameter("empty histogram".into()));
        }
        Ok(Self {
            setting,
            counts,
            n_samples,
            seed,
        })
    }

    /// Relative frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_samples as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn occupied_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Writes `# key: value` header lines followed by `bin_1,…,bin_m,count`
    /// rows for occupied cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        let phi: Vec<String> = self.setting.phi.iter().map(|p| format!("{p:?}")).collect();
        let grid: Vec<String> = self
            .setting
            .grid
            .iter()
            .map(|a| format!("{:?} {:?} {}", a.min, a.max, a.bins))
            .collect();
        writeln!(w, "# phi: {}", phi.join(" "))?;
        writeln!(w, "# grid: {}", grid.join("; "))?;
        writeln!(w, "# n_samples: {}", self.n_samples)?;
        writeln!(w, "# seed: {}", self.seed)?;
        let mut csv = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.setting.modes()).map(|j| format!("bin{j}")).collect();
        header.push("count".into());
        csv.write_record(&header).map_err(csv_err)?;
        for (idx, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut row: Vec<String> = self.setting.unflatten(idx).iter().map(|b| b.to_string()).collect();
            row.push(c.to_string());
            csv.write_record(&row).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut meta = std::collections::HashMap::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            let Some(rest) = line.trim().strip_prefix('#') else {
                break;
            };
            if let Some((k, v)) = rest.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| Error::Parse(format!("missing header '{k}'")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")));
        let phi = get("phi")?.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
        let grid = get("grid")?
            .split(';')
            .map(|axis| {
                let f: Vec<&str> = axis.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad grid axis '{axis}'")));
                }
                let bins = f[2].parse().map_err(|_| Error::Parse(format!("bad bin count '{}'", f[2])))?;
                GridAxis::new(num(f[0])?, num(f[1])?, bins)
            })
            .collect::<Result<Vec<_>>>()?;
        let seed = get("seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let declared: u64 = get("n_samples")?.parse().map_err(|_| Error::Parse("bad n_samples".into()))?;
        let setting = MeasurementSetting::new(phi, grid)?;
        let m = setting.modes();

        // `line` holds the column header consumed by the header loop.
        let rest = std::iter::once(Ok(line.clone())).chain(reader.lines());
        let body: String = rest.collect::<std::io::Result<Vec<_>>>()?.join("\n");
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        let mut counts = vec![0u64; setting.cells()];
        for rec in csv.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != m + 1 {
                return Err(Error::Parse(format!("expected {} columns, got {}", m + 1, rec.len())));
            }
            let mut bins = Vec::with_capacity(m);
            for (j, field) in rec.iter().take(m).enumerate() {
                let b: usize = field.parse().map_err(|_| Error::Parse(format!("bad bin '{field}'")))?;
                if b >= setting.grid[j].bins {
                    return Err(Error::Parse(format!("bin {b} outside axis {j}")));
                }
                bins.push(b);
            }
            let c: u64 = rec[m].parse().map_err(|_| Error::Parse(format!("bad count '{}'", &rec[m])))?;
            counts[setting.flat_index(&bins)] += c;
        }
        let ds = Self::new(setting, counts, seed)?;
        if ds.n_samples != declared {
            return Err(Error::Parse(format!(
                "header declares {declared} samples, rows sum to {}",
                ds.n_samples
            )));
        }
        Ok(ds)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Draws `n` outcomes from `dist` on RNG stream `stream` of `seed`.
pub fn sample_stream(dist: &GridDistribution, n: u64, seed: u64, stream: u64) -> Result<HomodyneDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let mut cdf = Vec::with_capacity(dist.probs.len());
    let mut acc = 0.0;
    for &p in &dist.probs {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative probability {p}")));
        }
        acc += p;
        cdf.push(acc);
    }
    if (acc - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("distribution sums to {acc}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut counts = vec![0u64; cdf.len()];
    let last = cdf.len() - 1;
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(last);
        counts[idx] += 1;
    }
    HomodyneDataset::new(dist.setting.clone(), counts, seed)
}

/// Multinomial draw of `n` outcomes, reproducible per `seed`.
pub fn sample(dist: &GridDistribution, n: u64, seed: u64) -> Result<HomodyneDataset> {
    sample_stream(dist, n, seed, 0)
}
