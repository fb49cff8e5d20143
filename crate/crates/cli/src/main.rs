use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use glmdesign::{Method, WeightFunction};
use glmdesign_cli::bench::{cmd_bench, BenchModel, BenchSpec, BetaDistribution};
use glmdesign_cli::commands::{cmd_region, cmd_solve, cmd_sweep_beta, Format, Range, RegionArgs};
use glmdesign_cli::{CliError, CliResult, ProblemFile};

/// Locally D-optimal designs for generalized linear models.
#[derive(Debug, Parser)]
#[command(name = "glmdesign", version)]
struct Cli {
    /// Worker threads for region and bench (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem file.
    Solve {
        file: PathBuf,
        /// auto, analytic or liftone.
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// json or csv.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Re-solve while one beta entry runs over a grid; CSV output.
    SweepBeta {
        file: PathBuf,
        /// Index into beta.
        #[arg(long)]
        vary: usize,
        /// lo:hi:steps.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value = "analytic")]
        method: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Boundary-optimality verdicts over a (beta1, beta2) grid; CSV output.
    Region {
        #[arg(long, allow_hyphen_values = true)]
        beta0: f64,
        /// lo:hi, used for both beta1 and beta2.
        #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
        range: String,
        /// Grid nodes per axis.
        #[arg(long, default_value_t = 41)]
        steps: usize,
        #[arg(long, default_value = "logit")]
        link: String,
        /// Nodes per side of the (a, b) grid minimized at each point.
        #[arg(long, default_value_t = 201)]
        grid_steps: usize,
        /// Only csv is supported.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Emit the region boundary as polylines instead of the grid.
        #[arg(long)]
        boundary: bool,
    },
    /// Analytic versus lift-one on seeded random instances; CSV summary.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
        /// uniform:lo:hi or normal:sigma.
        #[arg(long, default_value = "uniform:-3:3", allow_hyphen_values = true)]
        dist: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// 2x2 or 2^k with k in 2..=6.
        #[arg(long, default_value = "2x2")]
        model: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn method(text: &str) -> CliResult<Method> {
    text.parse().map_err(|_| CliError::input(format!("--method: expected auto, analytic or liftone, got {text:?}")))
}

fn check_tol(tol: f64) -> CliResult<f64> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(CliError::input(format!("--tol: must be positive, got {tol}")))
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Solve { file, method: m, tol, format } => {
            let fmt: Format = format.parse()?;
            let (m, tol) = (method(&m)?, check_tol(tol)?);
            cmd_solve(&ProblemFile::read(&file)?, m, tol, fmt)
        }
        Command::SweepBeta { file, vary, range, method: m, tol } => {
            let (m, tol) = (method(&m)?, check_tol(tol)?);
            let range = Range::parse(&range, "--range")?;
            cmd_sweep_beta(&ProblemFile::read(&file)?, vary, range, m, tol)
        }
        Command::Region { beta0, range, steps, link, grid_steps, format, boundary } => {
            if format != "csv" {
                return Err(CliError::input(format!("--format: region output is csv only, got {format:?}")));
            }
            let (lo, hi) = range
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| CliError::input(format!("--range: expected lo:hi, got {range:?}")))?;
            let link = WeightFunction::from_name(&link)
                .ok_or_else(|| CliError::input(format!("--link: unknown weight function {link:?}")))?;
            cmd_region(&RegionArgs { beta0, lo, hi, steps, link, grid_steps }, boundary)
        }
        Command::Bench { instances, dist, seed, model, tol } => cmd_bench(&BenchSpec {
            n_instances: instances,
            distribution: BetaDistribution::parse(&dist)?,
            seed,
            model: BenchModel::parse(&model)?,
            tol: check_tol(tol)?,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("glmdesign: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("glmdesign: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
