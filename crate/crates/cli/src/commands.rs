use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use robust_scatter::estimators::{self, EstimatorKind, ScatterEstimate, SolverConfig, UFunction};
use robust_scatter::lab::{self, ExperimentConfig};
use robust_scatter::master::{self, MasterSetup, WeightModel};
use robust_scatter::model::{self, Dataset, ScatterMatrix};
use robust_scatter::samplers::{DistributionSpec, Family, RadialLaw};
use robust_scatter::sparse::{self, SparseEstimate};

use crate::output::{self, Format, Output};
use crate::{
    CliError, ClimeArgs, DiagnoseArgs, DistArgs, EstimateArgs, EstimatorArgs, MasterArgs,
    SimulateArgs, SolverArgs, SparseCovArgs,
};

/// The `est.json` layout; also read back by the round-trip tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub kind: EstimatorKind,
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    /// Row-major.
    pub matrix: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub u: Option<String>,
}

impl EstimateRecord {
    fn new(est: &ScatterEstimate, n: usize) -> Self {
        Self {
            kind: est.kind,
            p: est.matrix.p(),
            n,
            alpha: est.alpha,
            matrix: model::to_rows(est.matrix.as_matrix()),
            weights: est.weights.clone(),
            iterations: est.iterations,
            residual: est.residual,
            converged: est.converged,
            u: est.u.as_ref().map(|u| u.name().to_string()),
        }
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset::read_csv_path(path)?)
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    Ok(read_dataset(path)?.into_samples())
}

fn read_square(path: &Path, p: usize, what: &str) -> Result<ScatterMatrix, CliError> {
    let m = read_matrix(path)?;
    if m.shape() != (p, p) {
        return Err(CliError::Usage(format!(
            "{what} in {} is {}x{}, expected {p}x{p}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(ScatterMatrix::new(m)?)
}

fn kind_and_u(args: &EstimatorArgs) -> Result<(EstimatorKind, Option<UFunction>), CliError> {
    let kind = EstimatorKind::parse(&args.kind)?;
    let u = if kind.uses_u() {
        Some(UFunction::by_name(&args.u)?)
    } else {
        None
    };
    Ok((kind, u))
}

fn solver(tol: f64, max_iter: usize) -> SolverConfig {
    SolverConfig::default()
        .with_tol(tol)
        .with_max_iter(max_iter)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    distribution: DistributionTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionTable {
    family: String,
    sigma: Option<f64>,
    radial: Option<String>,
    shape_file: Option<PathBuf>,
    mean: Option<Vec<f64>>,
}

/// Distribution settings after merging flags and the optional TOML file.
struct ResolvedDist {
    family: String,
    sigma: f64,
    radial: Option<String>,
    shape_file: Option<PathBuf>,
    mean: Option<Vec<f64>>,
}

fn resolve_dist(args: &DistArgs) -> Result<ResolvedDist, CliError> {
    let Some(path) = &args.config else {
        let mean = match &args.mean_file {
            Some(f) => Some(read_matrix(f)?.iter().copied().collect()),
            None => None,
        };
        return Ok(ResolvedDist {
            family: args.dist.clone(),
            sigma: args.sigma,
            radial: Some(args.radial.clone()),
            shape_file: args.shape_file.clone(),
            mean,
        });
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg: ConfigFile =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let d = cfg.distribution;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(ResolvedDist {
        family: d.family,
        sigma: d
            .sigma
            .unwrap_or(robust_scatter::samplers::DEFAULT_SMOOTHING),
        radial: d.radial,
        shape_file: d
            .shape_file
            .map(|f| if f.is_relative() { base.join(f) } else { f }),
        mean: d.mean,
    })
}

fn build_spec(d: &ResolvedDist, p: usize) -> Result<DistributionSpec, CliError> {
    let radial = match (&d.radial, d.family.as_str()) {
        (Some(r), "elliptical") => Some(RadialLaw::parse(r)?),
        _ => None,
    };
    let mut spec = DistributionSpec::new(Family::from_name(&d.family, Some(d.sigma), radial)?);
    if let Some(f) = &d.shape_file {
        spec = spec.with_shape(read_square(f, p, "shape matrix")?);
    }
    if let Some(m) = &d.mean {
        if m.len() != p {
            return Err(CliError::Usage(format!(
                "mean has length {}, expected {p}",
                m.len()
            )));
        }
        spec = spec.with_mean(DVector::from_column_slice(m));
    }
    Ok(spec)
}

fn dist_echo(d: &ResolvedDist) -> Value {
    json!({
        "family": d.family,
        "sigma": d.sigma,
        "radial": d.radial,
        "shape_file": d.shape_file,
        "mean": d.mean,
    })
}

pub fn estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let data = read_dataset(&a.input)?;
    let (kind, u) = kind_and_u(&a.estimator)?;
    let est = estimators::estimate(
        &data,
        kind,
        u.as_ref(),
        a.estimator.alpha,
        &solver(a.solver.tol, a.solver.max_iter),
    )?;
    if !est.converged {
        return Err(CliError::NotConverged {
            iterations: est.iterations,
            residual: est.residual,
        });
    }
    let record = EstimateRecord::new(&est, data.n());
    let text = match out.format() {
        Format::Json => output::to_json(&record)?,
        Format::Csv => output::matrix_csv(est.matrix.as_matrix()),
    };
    out.write_primary(&text)?;
    out.write_sidecar(
        "estimate",
        json!({
            "input": a.input,
            "kind": kind,
            "u": u.as_ref().map(|u| u.name().to_string()),
            "alpha": a.estimator.alpha,
            "tol": a.solver.tol,
            "max_iter": a.solver.max_iter,
        }),
        json!({
            "n": data.n(),
            "p": data.p(),
            "iterations": est.iterations,
            "residual": est.residual,
            "converged": est.converged,
        }),
    )
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let (kind, u) = kind_and_u(&a.estimator)?;
    let dist = resolve_dist(&a.dist)?;
    if dist.shape_file.is_some() && a.dims.len() > 1 {
        return Err(CliError::Usage(
            "a shape matrix fixes p; use a single --dims value".into(),
        ));
    }
    let first = *a
        .dims
        .first()
        .ok_or_else(|| CliError::Usage("--dims is empty".into()))?;
    let spec = build_spec(&dist, first)?;
    let mut cfg = ExperimentConfig::new(kind, spec)
        .with_alpha(a.estimator.alpha)
        .with_dims(a.dims.clone())
        .with_ratio(a.ratio)
        .with_reps(a.reps)
        .with_seed(a.seed)
        .with_symmetrize(a.symmetrize)
        .with_solver(solver(a.tol, a.max_iter));
    cfg.master_reps = a.master_reps;
    cfg.tol_root = a.tol_root;
    if let Some(u) = u.clone() {
        cfg = cfg.with_u(u);
    }
    let report = lab::weight_deviation_experiment(&cfg)?;
    let text = match out.format() {
        Format::Json => output::to_json(&report)?,
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?
        }
    };
    out.write_primary(&text)?;
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "p": r.p,
                "n": r.n,
                "predicted_weight": r.predicted_weight,
                "failures": r.failures,
                "failed_seeds": r.failed_seeds,
                "seeds": r.replicates.iter().map(|x| x.seed).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.write_sidecar(
        "simulate",
        json!({
            "kind": kind,
            "u": u.as_ref().map(|u| u.name().to_string()),
            "alpha": a.estimator.alpha,
            "distribution": dist_echo(&dist),
            "dims": a.dims,
            "ratio": a.ratio,
            "reps": a.reps,
            "seed": a.seed,
            "symmetrize": a.symmetrize,
            "tol": a.tol,
            "max_iter": a.max_iter,
            "master_reps": a.master_reps,
            "tol_root": a.tol_root,
        }),
        json!({
            "slope_linf": report.slope_linf(),
            "slope_rmse": report.slope_rmse(),
            "linf_fit": report.linf_fit,
            "rmse_fit": report.rmse_fit,
            "rows": rows,
            "wall_time_secs": report.wall_time_secs,
        }),
    )
}

pub fn master_eq(a: &MasterArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let kind = EstimatorKind::parse(&a.kind)?;
    let model = match kind {
        EstimatorKind::TylerRegularized => WeightModel::Tyler,
        EstimatorKind::MaronnaRegularized => WeightModel::Maronna(UFunction::by_name(&a.u)?),
        _ => {
            return Err(CliError::Usage(
                "master-eq applies to the regularized estimators (tre, mre)".into(),
            ))
        }
    };
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        return Err(CliError::Usage(format!(
            "--gamma must be positive, got {}",
            a.gamma
        )));
    }
    let n = (a.p as f64 / a.gamma).round() as usize;
    let dist = resolve_dist(&a.dist)?;
    let spec = build_spec(&dist, a.p)?;
    let setup = MasterSetup::new(spec, n, a.p, a.alpha, model)
        .with_reps(a.reps)
        .with_seed(a.seed);
    let res = master::solve_master(&setup, a.tol_root)?;
    let gamma = setup.gamma();
    let q_target = (kind == EstimatorKind::TylerRegularized).then(|| 1.0 / (1.0 + a.alpha - gamma));
    let text = match out.format() {
        Format::Json => {
            let mut v = serde_json::to_value(&res).map_err(|e| CliError::Io(e.to_string()))?;
            v["p"] = json!(a.p);
            v["n"] = json!(n);
            v["gamma"] = json!(gamma);
            v["alpha"] = json!(a.alpha);
            v["q_target"] = json!(q_target);
            output::to_json(&v)?
        }
        Format::Csv => output::record_csv(&[
            ("d_star", res.d_star),
            ("bracket_lo", res.bracket.0),
            ("bracket_hi", res.bracket.1),
            ("f_residual", res.f_residual),
            ("mc_reps", res.mc_reps as f64),
            ("mc_stderr", res.mc_stderr),
            ("q_star", res.q_star),
            ("d_star_stderr", res.d_star_stderr),
            ("predicted_weight", res.predicted_weight),
        ]),
    };
    out.write_primary(&text)?;
    out.write_sidecar(
        "master-eq",
        json!({
            "kind": kind,
            "u": setup.model.u().map(|u| u.name().to_string()),
            "alpha": a.alpha,
            "gamma": a.gamma,
            "p": a.p,
            "n": n,
            "distribution": dist_echo(&dist),
            "reps": a.reps,
            "seed": a.seed,
            "tol_root": a.tol_root,
        }),
        json!({
            "d_star": res.d_star,
            "predicted_weight": res.predicted_weight,
            "q_star": res.q_star,
            "q_target": q_target,
            "mc_stderr": res.mc_stderr,
        }),
    )
}

fn write_sparse(
    out: &Output,
    est: &SparseEstimate,
    command: &str,
    config: Value,
) -> Result<(), CliError> {
    let text = match out.format() {
        Format::Json => output::to_json(est)?,
        Format::Csv => output::matrix_csv(&est.matrix),
    };
    out.write_primary(&text)?;
    out.write_sidecar(
        command,
        config,
        json!({
            "method": est.method,
            "parameter": est.parameter,
            "input_norms": est.input_norms,
            "error_vs_truth": est.error_vs_truth,
        }),
    )
}

pub fn sparse_cov(a: &SparseCovArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let data = read_dataset(&a.input)?;
    let truth = match &a.truth {
        Some(f) => Some(read_square(f, data.p(), "truth")?),
        None => None,
    };
    let est = sparse::sparse_cov_estimate(&data, a.c1, truth.as_ref(), &solver_of(&a.solver))?;
    write_sparse(
        &out,
        &est,
        "sparse-cov",
        json!({
            "input": a.input,
            "c1": a.c1,
            "truth": a.truth,
            "tol": a.solver.tol,
            "max_iter": a.solver.max_iter,
        }),
    )
}

fn solver_of(s: &SolverArgs) -> SolverConfig {
    solver(s.tol, s.max_iter)
}

pub fn clime(a: &ClimeArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let data = read_dataset(&a.input)?;
    let proxy = match a.proxy.as_str() {
        "tyler" => {
            let est = estimators::tyler(&data, &solver_of(&a.solver))?;
            if !est.converged {
                return Err(CliError::NotConverged {
                    iterations: est.iterations,
                    residual: est.residual,
                });
            }
            est.matrix
        }
        "sample" => model::sample_covariance(&data),
        other => {
            return Err(CliError::Usage(format!(
                "unknown proxy {other:?}; use tyler or sample"
            )))
        }
    };
    let truth = match &a.truth {
        Some(f) => Some(read_square(f, data.p(), "truth")?.into_matrix()),
        None => None,
    };
    let est = sparse::clime(&proxy, a.lambda, truth.as_ref())?;
    write_sparse(
        &out,
        &est,
        "clime",
        json!({
            "input": a.input,
            "lambda": a.lambda,
            "proxy": a.proxy,
            "truth": a.truth,
            "tol": a.solver.tol,
            "max_iter": a.solver.max_iter,
        }),
    )
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let out = Output::new(a.out.clone())?;
    let data = read_dataset(&a.input)?;
    let gamma = data.gamma();
    let quadratic = if data.n() > data.p() {
        let q = lab::quadratic_form_diagnostics(&data)?;
        Some(json!({
            "max_full_deviation": q.max_full_deviation,
            "loo_target": q.loo_target,
            "max_loo_deviation": q.max_loo_deviation,
            "max_identity_error": q.max_identity_error,
        }))
    } else {
        None
    };
    let stieltjes = lab::stieltjes_diag(&data, a.eps)?;
    let (lambda_min, lambda_max) = lab::eigen_bounds_diag(&data);
    let te_existence = estimators::check_te_existence(&data);
    let text = match out.format() {
        Format::Json => output::to_json(&json!({
            "n": data.n(),
            "p": data.p(),
            "gamma": gamma,
            "te_existence": te_existence,
            "quadratic_forms": quadratic,
            "stieltjes": { "eps": a.eps, "value": stieltjes, "limit": (gamma < 1.0).then(|| 1.0 / (1.0 - gamma)) },
            "eigenvalues": { "min": lambda_min, "max": lambda_max },
        }))?,
        Format::Csv => output::record_csv(&[
            ("n", data.n() as f64),
            ("p", data.p() as f64),
            ("gamma", gamma),
            ("stieltjes", stieltjes),
            ("lambda_min", lambda_min),
            ("lambda_max", lambda_max),
        ]),
    };
    out.write_primary(&text)?;
    out.write_sidecar(
        "diagnose",
        json!({ "input": a.input, "eps": a.eps }),
        json!({ "n": data.n(), "p": data.p(), "te_existence": te_existence }),
    )
}
