//! `weblab` — numerical experiments on webs of confocal conics.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration
//! or runtime error.

mod config;
mod report;
mod runner;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "weblab",
    about = "Web-geometry laboratory: hexagon closure, Abelian-relation rank, rank-curve structure and identity verification for webs built from confocal conics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the collocation/sampling seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the rank-curve arc samples as CSV (quartic/all only).
    #[arg(long)]
    arcs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference verification of the displayed differential identities.
    Verify(CommonArgs),
    /// Hexagonal closure defects of every 3-subweb.
    Hexagon(CommonArgs),
    /// Spectral estimate of the Abelian-relation rank.
    Rank(CommonArgs),
    /// Rank-curve arcs, component fits and incidence checks.
    Quartic(CommonArgs),
    /// Loop defects of the closed coefficient systems.
    Frobenius(CommonArgs),
    /// Every suite applicable to the configured web.
    All(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Verify(a) => ("verify", a),
        Command::Hexagon(a) => ("hexagon", a),
        Command::Rank(a) => ("rank", a),
        Command::Quartic(a) => ("quartic", a),
        Command::Frobenius(a) => ("frobenius", a),
        Command::All(a) => ("all", a),
    };
    match execute(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(name: &str, args: &CommonArgs) -> Result<bool, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        cfg.collocation.seed = seed;
    }
    let started = Instant::now();
    let report = runner::run(name, &cfg)?;
    eprintln!("{name} finished in {:.2}s", started.elapsed().as_secs_f64());
    print!("{}", report.summary());
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json())
            .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    if let Some(arcs) = &args.arcs {
        let csv = report.arcs_csv()?;
        std::fs::write(arcs, csv).map_err(|e| format!("cannot write {}: {e}", arcs.display()))?;
    }
    Ok(report.pass)
}
