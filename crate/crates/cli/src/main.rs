//! `nlivp check | solve | study <config.json>`
//!
//! Exit codes: 0 success, 1 hypothesis failure, 2 numerical failure,
//! 3 configuration error.

mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nlivp::dsl::DslError;
use nlivp::hypothesis::{report, validate_envelope_by_sampling};
use nlivp::truncation::{convergence_study, StudySolver};
use nlivp::{solve_picard, solve_shooting, Error, PicardSettings, ShootingSettings};

use config::ConfigDocument;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                Error::HypothesisViolation { .. } => 1,
                Error::NonConvergence { .. } | Error::Evaluation { .. } | Error::Internal(_) => 2,
                Error::Dsl(DslError::Domain(_)) => 2,
                Error::Config(_) | Error::Index { .. } | Error::BandViolation { .. } | Error::Dsl(_) => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlivp", version, about = "Solve ODE systems with nonlocal initial conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Picard,
    Shoot,
}

#[derive(Debug, clap::Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "picard")]
    method: MethodArg,
    /// Stopping tolerance (default 1e-12 for picard, 1e-11 for shoot).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Initial Picard damping in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
}

impl SolverArgs {
    fn solver(&self) -> StudySolver {
        match self.method {
            MethodArg::Picard => {
                let d = PicardSettings::default();
                StudySolver::Picard(PicardSettings {
                    tol: self.tol.unwrap_or(d.tol),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                    damping: self.damping,
                })
            }
            MethodArg::Shoot => {
                let d = ShootingSettings::default();
                StudySolver::Shoot(ShootingSettings {
                    tol: self.tol.unwrap_or(d.tol),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                })
            }
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the existence hypotheses for p = 1..P.
    Check {
        config: PathBuf,
        #[arg(long)]
        p_max: Option<usize>,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Random samples per p for the envelope check (0 disables it).
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Solve at the configured truncation level.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Trajectory CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Diagnostics JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve at several truncation levels and compare consecutive ones.
    Study {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        truncations: Vec<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn check(
    config: &Path,
    p_max: Option<usize>,
    json: Option<&PathBuf>,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<u8, CliError> {
    if p_max == Some(0) {
        return Err(CliError::Config("--p-max must be at least 1".into()));
    }
    let spec = ConfigDocument::load(config)?.build(p_max)?;
    if spec.envelope().is_none() {
        return Err(CliError::Config("problem.envelopes: required by check".into()));
    }
    let rep = report(&spec)?;
    let sampling = if samples > 0 && rep.hyp_2_5_pass {
        Some(validate_envelope_by_sampling(&spec, samples, radius, seed)?)
    } else {
        None
    };
    print!("{}", output::check_table(&rep, sampling.as_ref()));
    if let Some(v) = sampling.as_ref().and_then(|s| s.violations.first()) {
        eprintln!(
            "warning: declared envelope exceeded at p = {}, t = {} ({} tail): {} > {}",
            v.p, v.t, v.tail, v.value, v.bound
        );
    }
    if let Some(path) = json {
        output::write(path, &output::check_json(&rep, sampling.as_ref()))?;
    }
    Ok(if rep.overall { 0 } else { 1 })
}

fn solve(config: &Path, args: &SolverArgs, out: Option<&PathBuf>, report_path: Option<&PathBuf>) -> Result<u8, CliError> {
    let spec = ConfigDocument::load(config)?.build(None)?;
    let hyp = match spec.envelope() {
        Some(_) => Some(report(&spec)?),
        None => None,
    };
    if let Some(h) = &hyp {
        if let Some(v) = &h.hyp_violation {
            return Err(CliError::Core(Error::HypothesisViolation {
                component: 0,
                detail: v.clone(),
            }));
        }
        if !h.overall {
            eprintln!("warning: the existence inequality fails for some p; solving anyway");
        }
    }
    let result = match args.solver() {
        StudySolver::Picard(s) => solve_picard(&spec, &s, None),
        StudySolver::Shoot(s) => solve_shooting(&spec, &s),
    }?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{:?}: converged in {} iterations, residual {:e}, max nonlocal residual {:e}",
        result.method,
        result.iterations,
        result.final_residual,
        result.nonlocal_residuals.iter().fold(0.0_f64, |m, v| m.max(*v))
    );
    if let Some(path) = out {
        output::write(path, &output::trajectory_csv(&result.trajectory))?;
    }
    if let Some(path) = report_path {
        output::write(path, &output::solve_json(&result, hyp.as_ref()))?;
    }
    Ok(0)
}

fn study(config: &Path, levels: &[usize], args: &SolverArgs, out: Option<&PathBuf>) -> Result<u8, CliError> {
    let spec = ConfigDocument::load(config)?.build(None)?;
    if let Some(d) = spec.rhs().finite_dim() {
        return Err(CliError::Config(format!(
            "problem.rhs: study needs an infinite family, got a {d}-equation system"
        )));
    }
    let table = convergence_study(&spec, levels, args.solver())?;
    let csv = table.to_csv();
    print!("{csv}");
    if !table.non_monotone.is_empty() {
        eprintln!("warning: d(N) increased at N = {:?}", table.non_monotone);
    }
    if let Some(path) = out {
        output::write(path, &csv)?;
    }
    Ok(if table.all_converged() { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Check {
            config,
            p_max,
            json,
            samples,
            radius,
            seed,
        } => check(config, *p_max, json.as_ref(), *samples, *radius, *seed),
        Command::Solve {
            config,
            solver,
            out,
            report,
        } => solve(config, solver, out.as_ref(), report.as_ref()),
        Command::Study {
            config,
            truncations,
            solver,
            out,
        } => study(config, truncations, solver, out.as_ref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
