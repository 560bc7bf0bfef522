//! Weight-concentration experiments and the diagnostics behind them.
//!
//! [`weight_deviation_experiment`] draws `reps` datasets per dimension,
//! fits the requested estimator and measures how far its weights are from
//! their predicted limit, in sup norm and root mean square.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorKind, SolverConfig, UFunction};
use crate::linalg;
use crate::master::{self, MasterSetup, WeightModel};
use crate::model::{self, Dataset};
use crate::samplers::{self, DistributionSpec};

/// Fraction of failed replicates at one dimension above which an experiment aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: EstimatorKind,
    pub spec: DistributionSpec,
    /// Required for ME and MRE.
    pub u: Option<UFunction>,
    /// Used by TRE and MRE.
    pub alpha: f64,
    pub dims: Vec<usize>,
    /// `n = round(ratio * p)`.
    pub ratio: f64,
    pub reps: usize,
    pub base_seed: u64,
    /// Draw `2n` rows and pair them with [`samplers::symmetrize`].
    pub symmetrize: bool,
    pub solver: SolverConfig,
    /// Monte Carlo settings for the master equation (TRE/MRE only).
    pub master_reps: usize,
    pub tol_root: f64,
}

impl ExperimentConfig {
    /// Grid `{64, 128, 256, 512}`, `n = 2p`, 50 replicates, solver tolerance `1e-8`.
    pub fn new(kind: EstimatorKind, spec: DistributionSpec) -> Self {
        Self {
            kind,
            spec,
            u: None,
            alpha: 1.0,
            dims: vec![64, 128, 256, 512],
            ratio: 2.0,
            reps: 50,
            base_seed: 0,
            symmetrize: false,
            solver: SolverConfig::default().with_tol(1e-8),
            master_reps: master::DEFAULT_REPS,
            tol_root: master::DEFAULT_TOL_ROOT,
        }
    }

    pub fn with_u(mut self, u: UFunction) -> Self {
        self.u = Some(u);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_dims(mut self, dims: Vec<usize>) -> Self {
        self.dims = dims;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn with_symmetrize(mut self, on: bool) -> Self {
        self.symmetrize = on;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn n_for(&self, p: usize) -> usize {
        (self.ratio * p as f64).round() as usize
    }

    /// Seed of replicate `rep` at dimension `p`.
    pub fn replicate_seed(&self, p: usize, rep: usize) -> u64 {
        samplers::derive_seed(samplers::derive_seed(self.base_seed, p as u64), rep as u64)
    }

    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "dims must be non-empty and strictly increasing, got {:?}",
                self.dims
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ratio must be positive, got {}",
                self.ratio
            )));
        }
        if self.kind.uses_u() && self.u.is_none() {
            return Err(Error::InvalidInput(format!(
                "{} experiment needs a u-function",
                self.kind.short_name()
            )));
        }
        for &p in &self.dims {
            if p == 0 || self.n_for(p) < 2 {
                return Err(Error::InvalidInput(format!("dimension {p} gives n < 2")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub linf: f64,
    pub rmse: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionRow {
    pub p: usize,
    pub n: usize,
    pub predicted_weight: f64,
    pub linf_mean: f64,
    pub linf_stderr: f64,
    pub rmse_mean: f64,
    pub rmse_stderr: f64,
    /// Replicates excluded for non-convergence or numerical failure.
    pub failures: usize,
    pub failed_seeds: Vec<u64>,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    /// Decay exponent: `value ~ p^(-slope)`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: EstimatorKind,
    pub family: String,
    pub alpha: f64,
    pub ratio: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub rows: Vec<DimensionRow>,
    /// Absent with fewer than two dimensions.
    pub linf_fit: Option<LogLogFit>,
    pub rmse_fit: Option<LogLogFit>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn slope_linf(&self) -> Option<f64> {
        self.linf_fit.map(|f| f.slope)
    }

    pub fn slope_rmse(&self) -> Option<f64> {
        self.rmse_fit.map(|f| f.slope)
    }

    /// Per-dimension table `p,n,linf_mean,linf_stderr,rmse_mean,rmse_stderr`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record([
            "p",
            "n",
            "linf_mean",
            "linf_stderr",
            "rmse_mean",
            "rmse_stderr",
        ])
        .map_err(io)?;
        for r in &self.rows {
            out.write_record([
                r.p.to_string(),
                r.n.to_string(),
                fmt_sig(r.linf_mean),
                fmt_sig(r.linf_stderr),
                fmt_sig(r.rmse_mean),
                fmt_sig(r.rmse_stderr),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ten significant digits.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.9e}")
        .parse::<f64>()
        .map(|x| x.to_string())
        .unwrap_or_else(|_| v.to_string())
}

/// Sup-norm and root-mean-square distance of `weights` from `target`.
pub fn weight_deviations(weights: &[f64], target: f64) -> (f64, f64) {
    let n = weights.len() as f64;
    let linf = weights
        .iter()
        .map(|w| (w - target).abs())
        .fold(0.0, f64::max);
    let rmse = (weights.iter().map(|w| (w - target).powi(2)).sum::<f64>() / n).sqrt();
    (linf, rmse)
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn predicted_weight_for(cfg: &ExperimentConfig, p: usize, n: usize) -> Result<f64> {
    match cfg.kind {
        EstimatorKind::Tyler => {
            master::predicted_weight(cfg.kind, None, None, Some(cfg.spec.tau()))
        }
        EstimatorKind::Maronna => master::predicted_weight(cfg.kind, cfg.u.as_ref(), None, None),
        EstimatorKind::TylerRegularized | EstimatorKind::MaronnaRegularized => {
            let model = match &cfg.u {
                Some(u) if cfg.kind.uses_u() => WeightModel::Maronna(u.clone()),
                _ => WeightModel::Tyler,
            };
            let setup = MasterSetup::new(cfg.spec.clone(), n, p, cfg.alpha, model)
                .with_reps(cfg.master_reps)
                .with_seed(samplers::derive_seed(cfg.base_seed ^ 0x6d61_7374, p as u64));
            Ok(master::solve_master(&setup, cfg.tol_root)?.predicted_weight)
        }
    }
}

/// Draw one replicate dataset as configured.
pub fn draw_replicate(cfg: &ExperimentConfig, p: usize, seed: u64) -> Result<Dataset> {
    let n = cfg.n_for(p);
    if cfg.symmetrize {
        samplers::symmetrize(&samplers::sample(&cfg.spec, 2 * n, p, seed)?)
    } else {
        samplers::sample(&cfg.spec, n, p, seed)
    }
}

enum Outcome {
    Ok(ReplicateOutcome),
    Failed(u64),
}

fn run_replicate(cfg: &ExperimentConfig, p: usize, seed: u64, target: f64) -> Result<Outcome> {
    let data = draw_replicate(cfg, p, seed)?;
    match estimators::estimate(&data, cfg.kind, cfg.u.as_ref(), cfg.alpha, &cfg.solver) {
        Ok(est) if est.converged => {
            let (linf, rmse) = weight_deviations(&est.weights, target);
            Ok(Outcome::Ok(ReplicateOutcome {
                seed,
                linf,
                rmse,
                iterations: est.iterations,
            }))
        }
        Ok(_) => Ok(Outcome::Failed(seed)),
        Err(e) if e.is_numerical() => Ok(Outcome::Failed(seed)),
        Err(e) => Err(e),
    }
}

/// Run the grid in `cfg`; deterministic in `cfg` (apart from `wall_time_secs`).
pub fn weight_deviation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.dims.len());
    for &p in &cfg.dims {
        let n = cfg.n_for(p);
        let target = predicted_weight_for(cfg, p, n)?;
        let outcomes = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, p, cfg.replicate_seed(p, rep), target))
            .collect::<Result<Vec<_>>>()?;
        let mut replicates = Vec::new();
        let mut failed_seeds = Vec::new();
        for o in outcomes {
            match o {
                Outcome::Ok(r) => replicates.push(r),
                Outcome::Failed(seed) => failed_seeds.push(seed),
            }
        }
        let failures = failed_seeds.len();
        if failures as f64 > MAX_FAILURE_FRACTION * cfg.reps as f64 {
            return Err(Error::TooManyFailures {
                p,
                failures,
                reps: cfg.reps,
            });
        }
        let linf: Vec<f64> = replicates.iter().map(|r| r.linf).collect();
        let rmse: Vec<f64> = replicates.iter().map(|r| r.rmse).collect();
        let (linf_mean, linf_stderr) = mean_stderr(&linf);
        let (rmse_mean, rmse_stderr) = mean_stderr(&rmse);
        rows.push(DimensionRow {
            p,
            n,
            predicted_weight: target,
            linf_mean,
            linf_stderr,
            rmse_mean,
            rmse_stderr,
            failures,
            failed_seeds,
            replicates,
        });
    }
    let fit = |f: fn(&DimensionRow) -> f64| -> Result<Option<LogLogFit>> {
        if rows.len() < 2 {
            return Ok(None);
        }
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.p as f64, f(r))).collect();
        fit_loglog_slope(&pts).map(Some)
    };
    let linf_fit = fit(|r| r.linf_mean)?;
    let rmse_fit = fit(|r| r.rmse_mean)?;
    Ok(ExperimentReport {
        kind: cfg.kind,
        family: cfg.spec.describe(),
        alpha: cfg.alpha,
        ratio: cfg.ratio,
        reps: cfg.reps,
        base_seed: cfg.base_seed,
        rows,
        linf_fit,
        rmse_fit,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Least squares on `(log p, log value)`; the reported slope is the negated
/// regression slope, so decaying curves have positive slope.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two points".into(),
        ));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "log-log fit needs positive coordinates, got ({x}, {y})"
        )));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs distinct dimensions".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - beta * x).powi(2))
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LogLogFit {
        slope: -beta,
        intercept,
        r2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadraticFormReport {
    /// `p^{-1} x_i^T S^{-1} x_i`.
    pub full: Vec<f64>,
    /// `p^{-1} x_i^T S_{-i}^{-1} x_i`, each from its own factorization.
    pub leave_one_out: Vec<f64>,
    /// `max_i |full_i - 1|`.
    pub max_full_deviation: f64,
    /// `1 / (1 - gamma)`.
    pub loo_target: f64,
    /// `max_i |leave_one_out_i - loo_target|`.
    pub max_loo_deviation: f64,
    /// `max_i |full_i - q_i / (1 + gamma q_i)| / full_i`.
    pub max_identity_error: f64,
}

/// Full and leave-one-out quadratic forms and the rank-one link between them.
pub fn quadratic_form_diagnostics(data: &Dataset) -> Result<QuadraticFormReport> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "quadratic form diagnostics need n > p, got n={n}, p={p}"
        )));
    }
    let gamma = data.gamma();
    let s = model::sample_covariance(data);
    let full = model::quadratic_forms(data, &s)
        .map_err(|_| Error::Singular("sample covariance".into()))?;
    let leave_one_out = (0..n)
        .into_par_iter()
        .map(|i| {
            let s_i = model::leave_one_out_covariance(data, i)?;
            let xi = data.sample(i);
            let chol =
                linalg::cholesky(s_i.as_matrix(), "leave-one-out covariance").map_err(|_| {
                    Error::Singular(format!("leave-one-out covariance without sample {i}"))
                })?;
            Ok(xi.dot(&chol.solve(&xi)) / p as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let loo_target = 1.0 / (1.0 - gamma);
    let max_full_deviation = full.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    let max_loo_deviation = leave_one_out
        .iter()
        .map(|q| (q - loo_target).abs())
        .fold(0.0, f64::max);
    let max_identity_error = full
        .iter()
        .zip(&leave_one_out)
        .map(|(d, q)| (d - q / (1.0 + gamma * q)).abs() / d.abs())
        .fold(0.0, f64::max);
    Ok(QuadraticFormReport {
        full,
        leave_one_out,
        max_full_deviation,
        loo_target,
        max_loo_deviation,
        max_identity_error,
    })
}

/// `p^{-1} Tr (S + eps I)^{-1}` for the sample covariance `S` of `data`.
pub fn stieltjes_diag(data: &Dataset, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    let mut m = model::sample_covariance(data).into_matrix();
    let p = m.nrows();
    for k in 0..p {
        m[(k, k)] += eps;
    }
    let linv = linalg::inverse_cholesky_factor(&m, "S + eps I")
        .map_err(|_| Error::Singular(format!("S + {eps} I")))?;
    // Tr M^{-1} = ||L^{-1}||_F^2
    Ok(linv.norm_squared() / p as f64)
}

/// Smallest and largest eigenvalue of the sample covariance.
pub fn eigen_bounds_diag(data: &Dataset) -> (f64, f64) {
    model::sample_covariance(data).extreme_eigenvalues()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScatterMatrix;

    #[test]
    fn slope_fit_examples() {
        let f = fit_loglog_slope(&[(10.0, 1.0), (100.0, 0.1)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        let f = fit_loglog_slope(&[(10.0, 0.3), (100.0, 0.3)]).unwrap();
        assert_eq!(f.slope, 0.0);
        let pts: Vec<(f64, f64)> = [32.0, 64.0, 128.0, 256.0]
            .iter()
            .map(|&p: &f64| (p, 3.0 * p.powf(-0.5)))
            .collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&[(10.0, 1.0), (20.0, 0.0)]).is_err());
        assert!(fit_loglog_slope(&[(10.0, 1.0)]).is_err());
    }

    #[test]
    fn single_replicate_single_dim() {
        let cfg = ExperimentConfig::new(EstimatorKind::Tyler, DistributionSpec::gaussian())
            .with_dims(vec![16])
            .with_reps(1);
        let rep = weight_deviation_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].replicates.len(), 1);
        assert_eq!(rep.rows[0].linf_stderr, 0.0);
        assert_eq!(rep.rows[0].rmse_stderr, 0.0);
        assert_eq!(rep.rows[0].n, 32);
        assert!(rep.linf_fit.is_none());
    }

    #[test]
    fn experiment_is_deterministic_and_rmse_below_linf() {
        let cfg = ExperimentConfig::new(EstimatorKind::Maronna, DistributionSpec::laplace())
            .with_u(UFunction::rational())
            .with_dims(vec![8, 16])
            .with_reps(6)
            .with_seed(3);
        let a = weight_deviation_experiment(&cfg).unwrap();
        let b = weight_deviation_experiment(&cfg).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.linf_mean, rb.linf_mean);
            assert_eq!(ra.rmse_mean, rb.rmse_mean);
            assert_eq!(ra.replicates.len() + ra.failures, 6);
            for r in &ra.replicates {
                assert!(r.rmse <= r.linf);
                assert!(r.rmse >= 0.0);
            }
        }
        assert_eq!(a.slope_linf(), b.slope_linf());
    }

    #[test]
    fn experiment_config_validation() {
        let base = ExperimentConfig::new(EstimatorKind::Tyler, DistributionSpec::gaussian());
        assert!(weight_deviation_experiment(&base.clone().with_dims(vec![32, 16])).is_err());
        assert!(weight_deviation_experiment(&base.clone().with_dims(vec![])).is_err());
        assert!(weight_deviation_experiment(&base.clone().with_reps(0)).is_err());
        let me = ExperimentConfig::new(EstimatorKind::Maronna, DistributionSpec::gaussian());
        assert!(weight_deviation_experiment(&me.with_dims(vec![4])).is_err());
    }

    #[test]
    fn too_many_failures_abort() {
        let cfg = ExperimentConfig::new(EstimatorKind::Tyler, DistributionSpec::gaussian())
            .with_dims(vec![10])
            .with_reps(4)
            .with_solver(SolverConfig::default().with_max_iter(1));
        assert!(matches!(
            weight_deviation_experiment(&cfg),
            Err(Error::TooManyFailures {
                p: 10,
                failures: 4,
                reps: 4
            })
        ));
    }

    #[test]
    fn csv_report_layout() {
        let cfg = ExperimentConfig::new(EstimatorKind::Tyler, DistributionSpec::gaussian())
            .with_dims(vec![4, 8])
            .with_reps(3);
        let rep = weight_deviation_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,n,linf_mean,linf_stderr,rmse_mean,rmse_stderr");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("4,8,"));
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig(123456.789012345), "123456.789");
    }

    #[test]
    fn quadratic_forms_link_exactly() {
        let data = samplers::sample(&DistributionSpec::laplace(), 40, 10, 1).unwrap();
        let r = quadratic_form_diagnostics(&data).unwrap();
        assert!(r.max_identity_error <= 1e-10);
        assert_eq!(r.full.len(), 40);
        assert!((r.loo_target - 1.0 / (1.0 - 0.25)).abs() < 1e-15);
        // mean of p^{-1} x_i^T S^{-1} x_i is exactly 1
        let mean: f64 = r.full.iter().sum::<f64>() / 40.0;
        assert!((mean - 1.0).abs() < 1e-12);
        let square = samplers::sample(&DistributionSpec::gaussian(), 5, 5, 1).unwrap();
        assert!(quadratic_form_diagnostics(&square).is_err());
    }

    fn identity_frame(p: usize) -> Dataset {
        // rows +-sqrt(p) e_k give S = I
        let mut rows = Vec::new();
        for k in 0..p {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; p];
                r[k] = s * (p as f64).sqrt();
                rows.push(r);
            }
        }
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn stieltjes_examples() {
        let data = identity_frame(4);
        assert!((stieltjes_diag(&data, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let g = samplers::sample(&DistributionSpec::gaussian(), 30, 10, 2).unwrap();
        let vals: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&e| stieltjes_diag(&g, e).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
        let wide = samplers::sample(&DistributionSpec::gaussian(), 3, 10, 2).unwrap();
        assert!(matches!(
            stieltjes_diag(&wide, 0.0),
            Err(Error::Singular(_))
        ));
        assert!(stieltjes_diag(&g, -1.0).is_err());
    }

    #[test]
    fn stieltjes_matches_eigenvalue_formula() {
        let g = samplers::sample(&DistributionSpec::laplace(), 25, 6, 3).unwrap();
        let eig = model::sample_covariance(&g)
            .as_matrix()
            .symmetric_eigenvalues();
        let direct: f64 = eig.iter().map(|l| 1.0 / (l + 0.3)).sum::<f64>() / 6.0;
        assert!((stieltjes_diag(&g, 0.3).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn eigen_bounds_examples() {
        let (lo, hi) = eigen_bounds_diag(&identity_frame(5));
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let g = samplers::sample(&DistributionSpec::gaussian(), 800, 200, 4).unwrap();
        let (lo, hi) = eigen_bounds_diag(&g);
        assert!(lo > 0.1 && hi < 4.0, "{lo} {hi}");
        // balanced sign vectors are orthogonal to the ones vector, so that
        // direction only carries the smoothing noise sigma^2 / (1 + sigma^2)
        let ps = samplers::sample(&DistributionSpec::permuted_smoothed(0.01), 800, 200, 4).unwrap();
        let (lo, _) = eigen_bounds_diag(&ps);
        let s = model::sample_covariance(&ps).into_matrix();
        let ones = nalgebra::DVector::from_element(200, 1.0 / 200f64.sqrt());
        let along_ones = ones.dot(&(&s * &ones));
        assert!(lo <= along_ones + 1e-15);
        assert!(along_ones < 4.0 * 1e-4 / (1.0 + 1e-4), "{along_ones}");
        let mut eig: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!(eig[1] > 0.05, "{:?}", &eig[..3]);
    }

    #[test]
    fn regularized_experiment_uses_master_prediction() {
        let cfg = ExperimentConfig::new(
            EstimatorKind::TylerRegularized,
            DistributionSpec::gaussian(),
        )
        .with_dims(vec![20])
        .with_reps(2)
        .with_alpha(1.0);
        let rep = weight_deviation_experiment(&cfg).unwrap();
        let w = rep.rows[0].predicted_weight;
        assert!(w > 1.0 && w < 2.0, "{w}");
    }

    #[test]
    fn tyler_prediction_uses_tau() {
        let shape = ScatterMatrix::from_diagonal(&[1.0, 3.0, 1.0, 3.0]).unwrap();
        let cfg = ExperimentConfig::new(
            EstimatorKind::Tyler,
            DistributionSpec::gaussian().with_shape(shape),
        )
        .with_dims(vec![4])
        .with_reps(1);
        let rep = weight_deviation_experiment(&cfg).unwrap();
        assert_eq!(rep.rows[0].predicted_weight, 0.5);
    }
}
