use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use modewitness::cluster::{cluster_witness_table, nullifier_sum_bound, optimize_cluster, OptimizedCluster};
use modewitness::generators::{build_generator_set, dedup_partitions, Partition};
use modewitness::homodyne::{
    default_settings, hellinger_replicates, homodyne_problem, homodyne_witness, marginal_distribution, sample_stream,
    FisherMatrix, HomodyneProblem, KappaSchedule,
};
use modewitness::mode_basis::BasisChange;
use modewitness::optimize::OptimizerConfig;
use modewitness::recipe::Recipe;
use modewitness::sweep::{critical_eta, loss_sweep, witness_at_eta, CriticalEta};
use modewitness::witness::{default_config, mode_intrinsic_witness_multistart, state_moments, WitnessProblem};

use crate::manifest::RunManifest;

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// State recipe (JSON).
    #[arg(long)]
    pub recipe: PathBuf,
    /// Maximal generator order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Partition such as "1|2|3" or "12|3"; defaults per command.
    #[arg(long)]
    pub partition: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Root RNG seed; defaults to the recipe's.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct Ctx {
    recipe: Recipe,
    seed: u64,
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<Ctx> {
        let recipe = Recipe::load(&self.recipe).with_context(|| format!("loading recipe {}", self.recipe.display()))?;
        std::fs::create_dir_all(&self.out)?;
        Ok(Ctx {
            seed: self.seed.unwrap_or(recipe.seed),
            recipe,
            out: self.out.clone(),
        })
    }

    fn partitions(&self, modes: usize, all_by_default: bool) -> Result<Vec<Partition>> {
        match &self.partition {
            Some(p) => Ok(vec![Partition::parse(p, modes)?]),
            None if all_by_default => Ok(dedup_partitions(&Partition::all_shapes(modes))),
            None => Ok(vec![Partition::singletons(modes)]),
        }
    }

    fn params(&self, extra: serde_json::Value) -> serde_json::Value {
        let mut v = json!({ "order": self.order, "partition": self.partition });
        if let (Some(a), serde_json::Value::Object(b)) = (v.as_object_mut(), extra) {
            a.extend(b);
        }
        v
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid points per angle.
    #[arg(long, default_value_t = 33)]
    pub points: usize,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta_max: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub phi_max: f64,
}

#[derive(Serialize)]
struct Argmin {
    order: usize,
    theta: f64,
    phi: f64,
    value: f64,
}

pub fn scan(a: &ScanArgs) -> Result<PathBuf> {
    let ctx = a.common.load()?;
    let m = ctx.recipe.modes;
    if m != 2 {
        bail!("grid scans need two modes; use `witness` for {m}");
    }
    let order = a.common.order.unwrap_or(2);
    let partition = a.common.partitions(m, false)?.remove(0);
    let state = ctx.recipe.build_state()?;
    let problems = (1..=order)
        .map(|n| {
            let moments = state_moments(&state, &build_generator_set(n, m)?)?;
            Ok(WitnessProblem::from_moments(&moments, &partition)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let thetas = lin(0.0, a.theta_max, a.points);
    let phis = lin(0.0, a.phi_max, a.points);
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect();
    let values = grid
        .par_iter()
        .map(|&(t, p)| problems.iter().map(|pr| pr.evaluate_params(&[t, p])).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;

    let mut man = RunManifest::new(
        "scan",
        &a.common.recipe,
        a.common.params(json!({ "points": a.points, "theta_max": a.theta_max, "phi_max": a.phi_max })),
        ctx.seed,
    )?;
    let mut header = vec!["theta".to_string(), "phi".to_string()];
    header.extend((1..=order).map(|n| format!("E_N{n}")));
    let rows: Vec<Vec<String>> = grid
        .iter()
        .zip(&values)
        .map(|(&(t, p), v)| [num(t), num(p)].into_iter().chain(v.iter().map(|&x| num(x))).collect())
        .collect();
    man.emit_csv(&ctx.out, "scan.csv", &header, &rows)?;
    let argmin: Vec<Argmin> = (0..order)
        .map(|k| {
            let (i, v) = values
                .iter()
                .enumerate()
                .min_by(|x, y| x.1[k].total_cmp(&y.1[k]))
                .map(|(i, v)| (i, v[k]))
                .unwrap_or((0, f64::NAN));
            Argmin {
                order: k + 1,
                theta: grid[i].0,
                phi: grid[i].1,
                value: v,
            }
        })
        .collect();
    man.emit_json(&ctx.out, "scan_summary.json", &json!({ "partition": partition.to_string(), "argmin": argmin }))?;
    man.finish(&ctx.out)
}

#[derive(Args, Debug, Clone)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Optimizer restarts with consecutive seeds.
    #[arg(long, default_value_t = 3)]
    pub starts: u64,
}

#[derive(Serialize)]
struct ClusterSummary {
    angles: Vec<f64>,
    o_free: DMatrix<f64>,
    nullifier_variances: Vec<f64>,
    baseline_variances: Vec<f64>,
    nullifier_sum: f64,
    nullifier_bound: f64,
}

fn cluster_summary(c: &OptimizedCluster, bound: f64) -> ClusterSummary {
    ClusterSummary {
        angles: c.angles.clone(),
        o_free: c.o_free.clone(),
        nullifier_variances: c.variances.clone(),
        baseline_variances: c.baseline_variances.clone(),
        nullifier_sum: c.variances.iter().sum(),
        nullifier_bound: bound,
    }
}

pub fn witness(a: &WitnessArgs) -> Result<PathBuf> {
    let ctx = a.common.load()?;
    let m = ctx.recipe.modes;
    let seeds: Vec<u64> = (0..a.starts.max(1)).map(|k| ctx.seed + k).collect();
    let cfg = default_config(m, ctx.seed);
    let mut man = RunManifest::new("witness", &a.common.recipe, a.common.params(json!({ "starts": a.starts })), ctx.seed)?;
    if ctx.recipe.is_cluster() {
        if a.common.order.is_some_and(|n| n != 1) {
            bail!("cluster witnesses are computed at order 1");
        }
        let spec = ctx.recipe.cluster_spec()?;
        let cluster = optimize_cluster(&spec, &OptimizerConfig::genetic(ctx.seed))?;
        let parts = a.common.partitions(m, true)?;
        let reports = cluster_witness_table(&cluster, &spec, &parts, &cfg, &seeds)?;
        man.emit_json(
            &ctx.out,
            "witness.json",
            &json!({ "order": 1, "cluster": cluster_summary(&cluster, nullifier_sum_bound(&spec)), "reports": reports }),
        )?;
    } else {
        let order = a.common.order.unwrap_or(2);
        let state = ctx.recipe.build_state()?;
        let moments = state_moments(&state, &build_generator_set(order, m)?)?;
        let reports = a
            .common
            .partitions(m, m > 2)?
            .iter()
            .map(|p| mode_intrinsic_witness_multistart(&WitnessProblem::from_moments(&moments, p)?, &cfg, &seeds))
            .collect::<Result<Vec<_>, _>>()?;
        man.emit_json(&ctx.out, "witness.json", &json!({ "order": order, "reports": reports }))?;
    }
    man.finish(&ctx.out)
}

#[derive(Args, Debug, Clone)]
pub struct ClusterOptArgs {
    #[command(flatten)]
    pub common: Common,
}

pub fn cluster_opt(a: &ClusterOptArgs) -> Result<PathBuf> {
    let ctx = a.common.load()?;
    let spec = ctx.recipe.cluster_spec()?;
    let cluster = optimize_cluster(&spec, &OptimizerConfig::genetic(ctx.seed))?;
    let mut man = RunManifest::new("cluster-opt", &a.common.recipe, a.common.params(json!({})), ctx.seed)?;
    man.emit_json(&ctx.out, "cluster.json", &cluster_summary(&cluster, nullifier_sum_bound(&spec)))?;
    man.finish(&ctx.out)
}

#[derive(Args, Debug, Clone)]
pub struct LossSweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Bisection tolerance for the critical efficiency.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Lowest efficiency probed by the bisection.
    #[arg(long, default_value_t = 0.01)]
    pub eta_min: f64,
}

pub fn loss_sweep_cmd(a: &LossSweepArgs) -> Result<PathBuf> {
    let ctx = a.common.load()?;
    let Some(grid) = ctx.recipe.sweep.clone() else {
        bail!("recipe has no sweep grid");
    };
    let m = ctx.recipe.modes;
    let order = a.common.order.unwrap_or(2);
    let partition = a.common.partitions(m, false)?.remove(0);
    let cfg = default_config(m, ctx.seed);
    let lossless = Recipe {
        loss_eta: None,
        ..ctx.recipe.clone()
    };
    let points = loss_sweep(&lossless, grid.subtraction, &grid.angles, &grid.eta, order, &partition, &cfg)?;
    let critical = grid
        .angles
        .par_iter()
        .map(|&angle| {
            let psi = lossless.with_subtraction_angle(grid.subtraction, angle)?.build_lossless()?;
            let c = critical_eta(|e| witness_at_eta(&psi, e, order, &partition, &cfg), a.eta_min, a.tolerance)?;
            Ok((angle, c))
        })
        .collect::<Result<Vec<(f64, CriticalEta)>>>()?;

    let mut man = RunManifest::new(
        "loss-sweep",
        &a.common.recipe,
        a.common.params(json!({ "tolerance": a.tolerance, "eta_min": a.eta_min })),
        ctx.seed,
    )?;
    let header = ["angle", "eta", "W"].map(String::from);
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![num(p.angle), num(p.eta), num(p.value)]).collect();
    man.emit_csv(&ctx.out, "loss_sweep.csv", &header, &rows)?;
    let header = ["angle", "critical_eta", "kind"].map(String::from);
    let rows: Vec<Vec<String>> = critical
        .iter()
        .map(|(angle, c)| {
            let kind = match c {
                CriticalEta::NeverWitnessed => "never",
                CriticalEta::At(_) => "bisected",
                CriticalEta::Below(_) => "below_floor",
            };
            vec![num(*angle), num(c.value()), kind.to_string()]
        })
        .collect();
    man.emit_csv(&ctx.out, "critical_eta.csv", &header, &rows)?;
    man.finish(&ctx.out)
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Outcomes per simulated experiment.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Independent experiments.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Basis grid points per angle for the witness maps.
    #[arg(long, default_value_t = 24)]
    pub points: usize,
}

#[derive(Serialize)]
struct SettingFisher {
    phi: Vec<f64>,
    analytic: FisherMatrix,
    hellinger: FisherMatrix,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn experiment(a: &ExperimentArgs) -> Result<PathBuf> {
    let ctx = a.common.load()?;
    let m = ctx.recipe.modes;
    let order = a.common.order.unwrap_or(1);
    if order != 1 {
        bail!("sampled Fisher matrices use displacement generators (order 1)");
    }
    if m != 2 {
        bail!("witness maps need two modes");
    }
    let partition = a.common.partitions(m, false)?.remove(0);
    let gens = build_generator_set(order, m)?;
    let state = ctx.recipe.build_state()?;
    let settings = default_settings(&state)?;
    let identity = BasisChange::identity(m);
    let (exact, analytic) = homodyne_problem(&state, &gens, &partition, &settings, &identity)?;
    let gamma = state_moments(&state, &gens)?.cov;
    let schedule = KappaSchedule::default();

    let mut man = RunManifest::new(
        "experiment",
        &a.common.recipe,
        a.common.params(json!({ "samples": a.samples, "reps": a.reps, "points": a.points })),
        ctx.seed,
    )?;
    let mut estimates = Vec::new();
    for (k, (s, f)) in settings.iter().zip(&analytic).enumerate() {
        let dist = marginal_distribution(&state, s)?;
        let setting_seed = ctx.seed.wrapping_add(k as u64 * 0x9E37_79B9);
        let est = hellinger_replicates(&dist, &gens, a.samples, a.reps, setting_seed, &schedule)?;
        let mut csv = Vec::new();
        sample_stream(&dist, a.samples, setting_seed, 0)?.write_csv(&mut csv)?;
        man.emit(&ctx.out, &format!("samples_setting{}.csv", k + 1), &csv)?;
        estimates.push((f.clone(), est));
    }

    // Witness maps from every replicate's Fisher matrices.
    let per_rep: Vec<HomodyneProblem> = (0..a.reps)
        .map(|r| {
            let mats: Vec<DMatrix<f64>> = estimates.iter().map(|(_, e)| e.replicates[r].clone()).collect();
            HomodyneProblem::new(&mats, &gamma, &gens, &partition)
        })
        .collect::<Result<_, _>>()?;
    let thetas = lin(0.0, std::f64::consts::PI, a.points + 1)[..a.points].to_vec();
    let phis = lin(0.0, std::f64::consts::TAU, a.points + 1)[..a.points].to_vec();
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect();
    let rows = grid
        .par_iter()
        .map(|&(t, p)| {
            let ex = exact.per_setting(&[t, p])?;
            let sampled = per_rep.iter().map(|pr| pr.per_setting(&[t, p])).collect::<Result<Vec<_>, _>>()?;
            let mut row = vec![num(t), num(p)];
            for k in 0..ex.len() {
                let col: Vec<f64> = sampled.iter().map(|v| v[k]).collect();
                let (mean, sd) = mean_sd(&col);
                row.extend([num(ex[k]), num(mean), num(sd)]);
            }
            let maxes: Vec<f64> = sampled.iter().map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            let (mean, sd) = mean_sd(&maxes);
            row.extend([num(ex.iter().copied().fold(f64::NEG_INFINITY, f64::max)), num(mean), num(sd)]);
            Ok(row)
        })
        .collect::<Result<Vec<_>, modewitness::Error>>()?;
    let mut header = vec!["theta".to_string(), "phi".to_string()];
    for k in 1..=settings.len() {
        header.extend([format!("E{k}_exact"), format!("E{k}_mean"), format!("E{k}_sd")]);
    }
    header.extend(["Emax_exact", "Emax_mean", "Emax_sd"].map(String::from));
    man.emit_csv(&ctx.out, "witness_map.csv", &header, &rows)?;

    let fishers: Vec<SettingFisher> = estimates
        .iter()
        .zip(&settings)
        .map(|((f, e), s)| SettingFisher {
            phi: s.phi.clone(),
            analytic: f.clone(),
            hellinger: e.fisher.clone(),
        })
        .collect();
    man.emit_json(&ctx.out, "fisher.json", &json!({ "n_samples": a.samples, "reps": a.reps, "settings": fishers }))?;

    let cfg = default_config(m, ctx.seed);
    let mean_mats: Vec<DMatrix<f64>> = estimates.iter().map(|(_, e)| e.fisher.values.clone()).collect();
    let sampled = HomodyneProblem::new(&mean_mats, &gamma, &gens, &partition)?;
    man.emit_json(
        &ctx.out,
        "w_hom.json",
        &json!({
            "partition": partition.to_string(),
            "exact": homodyne_witness(&exact, &cfg)?,
            "sampled_mean": homodyne_witness(&sampled, &cfg)?,
        }),
    )?;
    man.finish(&ctx.out)
}
