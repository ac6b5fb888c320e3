//! Experiment runner: discretizes the coupled KdV control system, synthesizes
//! insensitizing controls and writes reproducible CSV artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric error,
//! 4 convergence error.

mod config;
mod output;
mod runs;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use hskdv_core::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hskdv", about = "Coupled-KdV insensitizing-control experiments")]
struct Cli {
    /// Configuration file (line-based `key = value`); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root directory (default: $HSKDV_OUT or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the `eps` config key.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Overrides the `grid_n` config key.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,

    /// Overrides the `grid_m` config key.
    #[arg(long = "grid-m", global = true)]
    grid_m: Option<usize>,

    /// Overrides the `seed` config key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the `s` config key.
    #[arg(long, global = true)]
    s: Option<f64>,

    /// Overrides the `amplitude` config key.
    #[arg(long, global = true)]
    amplitude: Option<f64>,

    /// Overrides the `cg_tol` config key.
    #[arg(long = "cg-tol", global = true)]
    cg_tol: Option<f64>,

    /// Overrides the `cg_max` config key.
    #[arg(long = "cg-max", global = true)]
    cg_max: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single scalar KdV solve; writes the space-time field as CSV.
    Simulate,
    /// Solve the extended or adjoint 4x4 system and dump the four fields.
    Cascade,
    /// Penalized-HUM null control for the linear system.
    ControlLinear,
    /// Picard fixed-point solve of the nonlinear system.
    Picard,
    /// Outer nonlinear null-control iteration.
    ControlNonlinear,
    /// Sentinel derivative and first-variation identity report.
    Insensitize,
    /// Dump the Carleman weight profiles and the gap ratio.
    AuditWeights,
    /// Observability and Carleman ratio audits over a random ensemble.
    AuditObservability,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                Error::Numeric(_) => 3,
                Error::Convergence { .. } => 4,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> hskdv_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.eps {
        cfg.eps = v;
    }
    if let Some(v) = cli.grid_n {
        cfg.grid_n = v;
    }
    if let Some(v) = cli.grid_m {
        cfg.grid_m = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.s {
        cfg.s = v;
    }
    if let Some(v) = cli.amplitude {
        cfg.amplitude = v;
    }
    if let Some(v) = cli.cg_tol {
        cfg.cg_tol = v;
    }
    if let Some(v) = cli.cg_max {
        cfg.cg_max = v;
    }
    cfg.validate()?;

    let out_root = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("HSKDV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    match cli.command {
        Command::Simulate => runs::simulate(&cfg, &out_root),
        Command::Cascade => runs::cascade(&cfg, &out_root),
        Command::ControlLinear => runs::control_linear(&cfg, &out_root),
        Command::Picard => runs::picard(&cfg, &out_root),
        Command::ControlNonlinear => runs::control_nonlinear(&cfg, &out_root),
        Command::Insensitize => runs::insensitize(&cfg, &out_root),
        Command::AuditWeights => runs::audit_weights(&cfg, &out_root),
        Command::AuditObservability => runs::audit_observability(&cfg, &out_root),
    }
}
