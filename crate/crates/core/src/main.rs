use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisy_euler::cli::{run_check, run_convergence, run_solve, ExperimentConfig, RunOptions};
use noisy_euler::Error;

/// Explicit Euler under exact and noisy information.
#[derive(Parser)]
#[command(name = "noisy-euler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical convergence rates for every noise level in the config.
    Convergence(Common),
    /// Sampled estimates of the growth, Hölder and Lipschitz constants.
    Check(Common),
    /// One Euler run, written as a trajectory CSV.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    config: PathBuf,
    /// Directory for relative output paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip the SVG plot.
    #[arg(long)]
    no_plot: bool,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress stdout.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            no_plot: self.no_plot,
            seed: self.seed,
            quiet: self.quiet,
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Convergence(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            run_convergence(&cfg, &c.options(), &mut stdout).map(drop)
        }
        Command::Check(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            run_check(&cfg, &c.options(), &mut stdout).map(drop)
        }
        Command::Solve(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            run_solve(&cfg, &c.options(), &mut stdout).map(drop)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ConfigField { .. } | Error::Usage(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
