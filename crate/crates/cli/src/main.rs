//! `robust-scatter`: fit robust scatter estimators, run weight-concentration
//! experiments, solve the master equation and build sparse shape estimates.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
//! failure (non-convergence, infeasibility, ...). Failures print a JSON
//! report to stderr and, when `--out` is given, to `<out>.error.json`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use robust_scatter::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Lib(Error),
    NotConverged { iterations: usize, residual: f64 },
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Lib(e) => e.code(),
            CliError::NotConverged { .. } => "not_converged",
        }
    }

    fn exit_status(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            CliError::NotConverged { .. } => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
            CliError::NotConverged {
                iterations,
                residual,
            } => format!("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "robust-scatter",
    version,
    about = "Robust M-estimators of scatter and their weight concentration"
)]
struct Cli {
    /// Worker threads for parallel replicates (results do not depend on it).
    #[arg(long, global = true, env = "ROBUST_SCATTER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit TE, ME, TRE or MRE to a CSV dataset.
    Estimate(EstimateArgs),
    /// Weight-deviation experiment over a grid of dimensions.
    Simulate(SimulateArgs),
    /// Solve the master equation by Monte Carlo and report the predicted weight.
    MasterEq(MasterArgs),
    /// Hard-thresholded Tyler estimator of a sparse shape matrix.
    SparseCov(SparseCovArgs),
    /// CLIME precision estimate with a scatter proxy.
    Clime(ClimeArgs),
    /// Quadratic-form, Stieltjes and eigenvalue diagnostics of a dataset.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Estimator: tyler (te), maronna (me), tre, mre.
    #[arg(long, default_value = "tyler")]
    pub kind: String,
    /// Weight function for maronna/mre: rational (= 2/(1+x)) or huber:t.
    #[arg(long, default_value = "rational")]
    pub u: String,
    /// Regularization for tre/mre.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Fixed-point convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Maximum fixed-point iterations.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    /// Sampling family: gaussian, laplace, permuted-smoothed, elliptical.
    #[arg(long, default_value = "gaussian")]
    pub dist: String,
    /// Smoothing level for permuted-smoothed.
    #[arg(long, default_value_t = robust_scatter::samplers::DEFAULT_SMOOTHING)]
    pub sigma: f64,
    /// Radial law for elliptical: constant:c, chi:k or pareto:a.
    #[arg(long, default_value = "constant:1")]
    pub radial: String,
    /// CSV file with the p x p shape matrix (identity when absent).
    #[arg(long)]
    pub shape_file: Option<PathBuf>,
    /// CSV file with the mean vector as a single row (zero when absent).
    #[arg(long)]
    pub mean_file: Option<PathBuf>,
    /// TOML file with a [distribution] table (family, sigma, radial, shape_file, mean).
    #[arg(long, conflicts_with_all = ["dist", "sigma", "radial", "shape_file", "mean_file"])]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Headerless CSV, one sample per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file (.json or .csv); JSON on stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Comma-separated, strictly increasing dimensions.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    pub dims: Vec<usize>,
    /// Samples per dimension: n = round(ratio * p).
    #[arg(long, default_value_t = 2.0)]
    pub ratio: f64,
    /// Replicates per dimension.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Base seed; every replicate seed is derived from it.
    #[arg(long)]
    pub seed: u64,
    /// Draw 2n rows and use pairwise differences (for non-centered laws).
    #[arg(long)]
    pub symmetrize: bool,
    /// Fixed-point convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Maximum fixed-point iterations.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Monte Carlo replicates for the master equation (tre/mre).
    #[arg(long, default_value_t = robust_scatter::master::DEFAULT_REPS)]
    pub master_reps: usize,
    /// Root tolerance for the master equation (tre/mre).
    #[arg(long, default_value_t = robust_scatter::master::DEFAULT_TOL_ROOT)]
    pub tol_root: f64,
    /// Output file (.csv per-dimension table or .json full report).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MasterArgs {
    /// tre or mre.
    #[arg(long, default_value = "tre")]
    pub kind: String,
    /// Weight function for mre: rational or huber:t.
    #[arg(long, default_value = "rational")]
    pub u: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Aspect ratio p/n; n = round(p / gamma).
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Monte Carlo replicates.
    #[arg(long, default_value_t = robust_scatter::master::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Stop when |F(d) - 1| or the relative bracket width is below this.
    #[arg(long, default_value_t = robust_scatter::master::DEFAULT_TOL_ROOT)]
    pub tol_root: f64,
    /// Output file (.json or .csv); JSON on stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SparseCovArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Threshold constant: t = c1 * ||S_Tyl|| * sqrt(log p / n).
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    /// CSV with the true shape matrix, to report the estimation error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClimeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Constraint level in ||S w - e_j||_inf <= lambda.
    #[arg(long)]
    pub lambda: f64,
    /// Scatter proxy: tyler or sample.
    #[arg(long, default_value = "tyler")]
    pub proxy: String,
    /// CSV with the true precision matrix, to report the estimation error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Regularization in p^{-1} Tr (S + eps I)^{-1}.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Estimate(a) => a.out.as_ref(),
        Command::Simulate(a) => a.out.as_ref(),
        Command::MasterEq(a) => a.out.as_ref(),
        Command::SparseCov(a) => a.out.as_ref(),
        Command::Clime(a) => a.out.as_ref(),
        Command::Diagnose(a) => a.out.as_ref(),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::MasterEq(a) => commands::master_eq(a),
        Command::SparseCov(a) => commands::sparse_cov(a),
        Command::Clime(a) => commands::clime(a),
        Command::Diagnose(a) => commands::diagnose(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let status = err.exit_status();
            let report = json!({
                "code": err.code(),
                "message": err.message(),
                "exit_status": status,
            });
            eprintln!("{report}");
            if let Some(p) = out_path(&cli.command) {
                if let Ok(out) = output::Output::new(Some(p.clone())) {
                    out.write_error_report(&report);
                }
            }
            ExitCode::from(status)
        }
    }
}
