//! Command implementations behind the `noisy-euler` binary.
//!
//! Every command validates and computes before touching the file system, so a
//! failing run leaves the output directory untouched.

pub mod config;
pub mod plot;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::euler::{euler_solve, euler_solve_noisy, Trajectory};
use crate::experiments::{convergence_studies, ConvergenceReport};
use crate::noise::make_oracle_with;
use crate::problems::{estimate_assumptions, AssumptionEstimate};

pub use config::ExperimentConfig;

/// Flags shared by all commands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub no_plot: bool,
    /// Replaces every seed in the config.
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl RunOptions {
    fn resolve(&self, configured: Option<&str>, default: &str) -> PathBuf {
        let name = Path::new(configured.unwrap_or(default));
        match &self.out_dir {
            Some(dir) if name.is_relative() => dir.join(name),
            _ => name.to_path_buf(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn say(out: &mut dyn Write, opts: &RunOptions, line: &str) -> Result<()> {
    if !opts.quiet {
        writeln!(out, "{line}").map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        })?;
    }
    Ok(())
}

/// Output of a finished convergence run.
#[derive(Debug)]
pub struct ConvergenceOutput {
    pub reports: Vec<ConvergenceReport>,
    pub csv: PathBuf,
    pub slopes: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Runs one study per entry of `delta_list`, prints a slope line per noise level
/// and writes the report CSV, the slopes CSV and the SVG plot.
pub fn run_convergence(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<ConvergenceOutput> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.base_seed = seed;
    }
    cfg.validate_study()?;
    let problem = cfg.problem.build()?;
    let reports = convergence_studies(&problem, &cfg.noise_models(), &cfg.settings())?;

    let mut table = Vec::new();
    report::write_reports(&mut table, &reports)?;
    let mut slopes = Vec::new();
    report::write_slopes(&mut slopes, &reports)?;

    let csv_path = opts.resolve(cfg.output.csv.as_deref(), "convergence.csv");
    let slopes_path = opts.resolve(cfg.output.slopes.as_deref(), "slopes.csv");
    write_file(&csv_path, &table)?;
    write_file(&slopes_path, &slopes)?;

    let mut plot_path = None;
    if !opts.no_plot {
        let path = opts.resolve(cfg.output.plot.as_deref(), "convergence.svg");
        let title = format!("{} problem, kind {}", cfg.problem.name(), cfg.kind);
        match plot::render_svg(&reports, &title) {
            Some(svg) => match write_file(&path, svg.as_bytes()) {
                Ok(()) => plot_path = Some(path),
                Err(e) => eprintln!("warning: plot not written: {e}"),
            },
            None => eprintln!("warning: plot skipped, no finite points"),
        }
    }

    for r in &reports {
        say(out, opts, &format!("slope delta={}: {:.6}", r.noise.delta, r.slope))?;
        if !r.clamped.is_empty() {
            let ns: Vec<String> = r.clamped.iter().map(|i| r.rows[*i].n.to_string()).collect();
            say(out, opts, &format!("  clamped at machine epsilon for n = {}", ns.join(", ")))?;
        }
    }
    Ok(ConvergenceOutput {
        reports,
        csv: csv_path,
        slopes: slopes_path,
        plot: plot_path,
    })
}

/// Estimates the growth, Hölder and Lipschitz constants on the ball of radius `R`.
pub fn run_check(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<AssumptionEstimate> {
    let section = cfg.check.as_ref().ok_or_else(|| Error::ConfigField {
        field: "check".into(),
        reason: "section required by the check command".into(),
    })?;
    if !(section.radius > 0.0 && section.radius.is_finite()) {
        return Err(Error::Usage(format!("check.R must be positive, got {}", section.radius)));
    }
    let problem = cfg.problem.build()?;
    let (alpha, beta) = cfg.problem.exponents();
    let seed = opts.seed.or(section.seed).unwrap_or(cfg.base_seed);
    let est = estimate_assumptions(
        &problem,
        section.radius,
        section.alpha.unwrap_or(alpha),
        section.beta.unwrap_or(beta),
        section.samples,
        seed,
    )?;
    say(out, opts, &format!("K_hat: {:.6e}", est.k_hat))?;
    say(out, opts, &format!("H_hat: {:.6e}", est.h_hat))?;
    say(out, opts, &format!("L_hat: {:.6e}", est.l_hat))?;
    Ok(est)
}

/// Integrates once with `solve.n` steps, through a noisy oracle when `solve.delta > 0`,
/// and writes the trajectory CSV.
pub fn run_solve(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<(Trajectory, PathBuf)> {
    let section = cfg.solve.as_ref().ok_or_else(|| Error::ConfigField {
        field: "solve".into(),
        reason: "section required by the solve command".into(),
    })?;
    if section.n == 0 {
        return Err(Error::ConfigField {
            field: "solve.n".into(),
            reason: "must be positive".into(),
        });
    }
    let problem = cfg.problem.build()?;
    let traj = if section.delta > 0.0 {
        let seed = opts.seed.or(section.seed).unwrap_or(cfg.base_seed);
        let oracle = make_oracle_with(&problem, cfg.kind, section.delta, seed, cfg.initial_noise)?;
        euler_solve_noisy(&problem, section.n, &oracle)?
    } else {
        euler_solve(&problem, section.n)?
    };
    let mut buf = Vec::new();
    report::write_trajectory(&mut buf, &traj)?;
    let path = opts.resolve(cfg.output.trajectory.as_deref(), "trajectory.csv");
    write_file(&path, &buf)?;
    let y = traj.final_state();
    say(out, opts, &format!("y(b) ~ {:?}", y))?;
    Ok((traj, path))
}
