mod commands;
mod manifest;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{ClusterOptArgs, ExperimentArgs, LossSweepArgs, ScanArgs, WitnessArgs};

#[derive(Parser, Debug)]
#[command(name = "modewitness", version, about = "Mode-intrinsic entanglement witnesses for simulated optical states")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MODEWITNESS_WORKERS", default_value_t = 0, global = true)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Witness landscape over a two-mode basis grid.
    Scan(ScanArgs),
    /// Witness minimized over mode bases, per partition.
    Witness(WitnessArgs),
    /// Witness over efficiency and a subtraction angle.
    LossSweep(LossSweepArgs),
    /// Sampled homodyne Fisher matrices and the measurement-based witness.
    Experiment(ExperimentArgs),
    /// Nullifier-minimizing cluster preparation.
    ClusterOpt(ClusterOptArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()?;
    }
    let manifest = match &cli.command {
        Command::Scan(a) => commands::scan(a)?,
        Command::Witness(a) => commands::witness(a)?,
        Command::LossSweep(a) => commands::loss_sweep_cmd(a)?,
        Command::Experiment(a) => commands::experiment(a)?,
        Command::ClusterOpt(a) => commands::cluster_opt(a)?,
    };
    println!("{}", manifest.display());
    Ok(())
}
