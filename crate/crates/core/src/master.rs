//! Monte Carlo evaluation of the scalar functions `Q` and `F` whose root
//! `F(d*) = 1` predicts the limiting weights of the regularized estimators.
//!
//! `Q(d) = p^{-1} E Tr Sigma_p (phi(d) S_{-i} + alpha d I)^{-1}` with
//! `S_{-i} = (1/n) sum_{j=1}^{n-1} x_j x_j^T`, and
//! `F(d) = (1 + alpha) Q(d) / (1 + gamma phi(d) Q(d))`.
//!
//! Each replicate draws `S_{-i}` once and keeps its spectrum, so `Q` can be
//! evaluated at any `d` in `O(p)` per replicate. Every `d` visited by the
//! root finder therefore sees the same draws.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, UFunction};
use crate::model::{Dataset, ScatterMatrix};
use crate::samplers::{self, DistributionSpec};

pub const DEFAULT_REPS: usize = 200;
pub const DEFAULT_TOL_ROOT: f64 = 1e-3;
const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// The weight law entering `phi`: `u(x) = 1/x` (so `phi = 1`) or a Maronna `u`.
#[derive(Debug, Clone)]
pub enum WeightModel {
    Tyler,
    Maronna(UFunction),
}

impl WeightModel {
    pub fn phi(&self, d: f64) -> f64 {
        match self {
            WeightModel::Tyler => 1.0,
            WeightModel::Maronna(u) => u.phi(d),
        }
    }

    /// The regularized estimator this model predicts.
    pub fn kind(&self) -> EstimatorKind {
        match self {
            WeightModel::Tyler => EstimatorKind::TylerRegularized,
            WeightModel::Maronna(_) => EstimatorKind::MaronnaRegularized,
        }
    }

    pub fn u(&self) -> Option<&UFunction> {
        match self {
            WeightModel::Tyler => None,
            WeightModel::Maronna(u) => Some(u),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Leave-one-out quadratic form `p^{-1} x_i^T (phi(d) S_{-i} + alpha d I)^{-1} x_i`.
pub fn q_hat(d: f64, data: &Dataset, i: usize, model: &WeightModel, alpha: f64) -> Result<f64> {
    check_positive("d", d)?;
    check_positive("alpha", alpha)?;
    let (n, p) = (data.n(), data.p());
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let x = data.samples();
    let xi = data.sample(i);
    let mut m = x.transpose() * x - &xi * xi.transpose();
    m *= model.phi(d) / n as f64;
    for k in 0..p {
        m[(k, k)] += alpha * d;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("regularized leave-one-out matrix".into()))?;
    Ok(xi.dot(&chol.solve(&xi)) / p as f64)
}

/// `(1 + alpha) Q / (1 + gamma phi(d) Q)` with `Q` the leave-one-out form at sample `i`.
pub fn f_hat(d: f64, data: &Dataset, i: usize, model: &WeightModel, alpha: f64) -> Result<f64> {
    let q = q_hat(d, data, i, model, alpha)?;
    Ok(f_from_q(q, d, data.gamma(), model, alpha))
}

fn f_from_q(q: f64, d: f64, gamma: f64, model: &WeightModel, alpha: f64) -> f64 {
    (1.0 + alpha) * q / (1.0 + gamma * model.phi(d) * q)
}

/// Everything that defines the Monte Carlo problem except the point `d`.
#[derive(Debug, Clone)]
pub struct MasterSetup {
    /// Sampling law; its `shape` is `Sigma_p` (identity when absent).
    pub spec: DistributionSpec,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub model: WeightModel,
    pub reps: usize,
    pub seed: u64,
}

impl MasterSetup {
    pub fn new(spec: DistributionSpec, n: usize, p: usize, alpha: f64, model: WeightModel) -> Self {
        Self {
            spec,
            n,
            p,
            alpha,
            model,
            reps: DEFAULT_REPS,
            seed: 0,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::InvalidInput(format!(
                "need n >= 2 and p >= 1, got n={}, p={}",
                self.n, self.p
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        check_positive("alpha", self.alpha)
    }
}

/// Spectral summary of one draw of `S_{-i}`: eigenvalues `lambda_k` and
/// weights `c_k = v_k^T Sigma_p v_k`, so that
/// `Tr Sigma_p (phi S + a I)^{-1} = sum_k c_k / (phi lambda_k + a)`.
#[derive(Debug, Clone)]
struct Replicate {
    eigenvalues: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Replicate {
    fn q(&self, phi: f64, ad: f64) -> f64 {
        let p = self.eigenvalues.len() as f64;
        let total: f64 = match &self.weights {
            None => self.eigenvalues.iter().map(|l| 1.0 / (phi * l + ad)).sum(),
            Some(c) => self
                .eigenvalues
                .iter()
                .zip(c)
                .map(|(l, c)| c / (phi * l + ad))
                .sum(),
        };
        total / p
    }
}

/// Fixed set of `S_{-i}` draws shared by every evaluation of `Q` and `F`.
#[derive(Debug, Clone)]
pub struct MonteCarloQ {
    setup: MasterSetup,
    reps: Vec<Replicate>,
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Pairwise summation in a fixed tree, so reductions do not depend on scheduling.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        len => {
            let (a, b) = v.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean_and_stderr(v: &[f64]) -> McEstimate {
    let r = v.len() as f64;
    let mean = pairwise_sum(v) / r;
    let stderr = if v.len() > 1 {
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        (pairwise_sum(&dev) / (r - 1.0)).sqrt() / r.sqrt()
    } else {
        0.0
    };
    McEstimate { mean, stderr }
}

impl MonteCarloQ {
    /// Draw `setup.reps` independent copies of `S_{-i}`; replicate `r` uses
    /// seed `derive_seed(setup.seed, r)`.
    pub fn draw(setup: &MasterSetup) -> Result<Self> {
        setup.validate()?;
        let (n, p) = (setup.n, setup.p);
        let shape = setup.spec.shape.as_ref().filter(|s| !s.is_identity());
        let reps = (0..setup.reps as u64)
            .into_par_iter()
            .map(|r| {
                let data =
                    samplers::sample(&setup.spec, n - 1, p, samplers::derive_seed(setup.seed, r))?;
                let x = data.samples();
                let s = x.transpose() * x / n as f64;
                Ok(match shape {
                    None => Replicate {
                        eigenvalues: s.symmetric_eigenvalues().iter().copied().collect(),
                        weights: None,
                    },
                    Some(sigma) => {
                        let eig = s.symmetric_eigen();
                        let rotated =
                            eig.eigenvectors.transpose() * sigma.as_matrix() * &eig.eigenvectors;
                        Replicate {
                            eigenvalues: eig.eigenvalues.iter().copied().collect(),
                            weights: Some(rotated.diagonal().iter().copied().collect()),
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            setup: setup.clone(),
            reps,
        })
    }

    pub fn setup(&self) -> &MasterSetup {
        &self.setup
    }

    /// Per-replicate values of `p^{-1} Tr Sigma_p (phi(d) S_{-i} + alpha d I)^{-1}`.
    pub fn q_samples(&self, d: f64) -> Vec<f64> {
        let phi = self.setup.model.phi(d);
        let ad = self.setup.alpha * d;
        self.reps.iter().map(|r| r.q(phi, ad)).collect()
    }

    pub fn q(&self, d: f64) -> Result<McEstimate> {
        check_positive("d", d)?;
        Ok(mean_and_stderr(&self.q_samples(d)))
    }

    /// `F` at the Monte Carlo mean of `Q`, with a delta-method standard error.
    pub fn f(&self, d: f64) -> Result<McEstimate> {
        let q = self.q(d)?;
        let (alpha, gamma, phi) = (
            self.setup.alpha,
            self.setup.gamma(),
            self.setup.model.phi(d),
        );
        let denom = 1.0 + gamma * phi * q.mean;
        Ok(McEstimate {
            mean: f_from_q(q.mean, d, gamma, &self.setup.model, alpha),
            stderr: (1.0 + alpha) * q.stderr / (denom * denom),
        })
    }
}

/// Monte Carlo mean and standard error of `Q(d)` over fresh draws.
pub fn q_mc(d: f64, setup: &MasterSetup) -> Result<McEstimate> {
    MonteCarloQ::draw(setup)?.q(d)
}

#[derive(Debug, Clone, Serialize)]
pub struct MasterEquationResult {
    pub d_star: f64,
    /// Bracket from the geometric expansion, `F(lo) > 1 > F(hi)`.
    pub bracket: (f64, f64),
    /// `|F(d*) - 1|`.
    pub f_residual: f64,
    pub mc_reps: usize,
    /// Standard error of `Q(d*)`.
    pub mc_stderr: f64,
    pub q_star: f64,
    /// Standard error of `F(d*)` carried through the local slope of `F`.
    pub d_star_stderr: f64,
    pub predicted_weight: f64,
    pub kind: EstimatorKind,
    pub bisections: usize,
}

/// Solve `F(d*) = 1` by bracketing from `[1/2, 2]` and bisection.
pub fn solve_master(setup: &MasterSetup, tol_root: f64) -> Result<MasterEquationResult> {
    check_positive("tol_root", tol_root)?;
    setup.validate()?;
    if let WeightModel::Tyler = setup.model {
        let bound = (setup.gamma() - 1.0).max(0.0);
        if !(setup.alpha > bound) {
            return Err(Error::Existence(format!(
                "regularized Tyler needs alpha > {bound}, got {}",
                setup.alpha
            )));
        }
    }
    let mc = MonteCarloQ::draw(setup)?;
    solve_with(&mc, tol_root)
}

/// Root finding on an existing set of draws.
pub fn solve_with(mc: &MonteCarloQ, tol_root: f64) -> Result<MasterEquationResult> {
    check_positive("tol_root", tol_root)?;
    let f = |d: f64| -> f64 { mc.f(d).map(|e| e.mean).unwrap_or(f64::NAN) };
    let (mut lo, mut hi) = (0.5, 2.0);
    let mut steps = 0;
    while !(f(lo) > 1.0) {
        if steps == MAX_DOUBLINGS {
            return Err(Error::BracketNotFound(MAX_DOUBLINGS));
        }
        hi = lo;
        lo /= 2.0;
        steps += 1;
    }
    while !(f(hi) < 1.0) {
        if steps == MAX_DOUBLINGS {
            return Err(Error::BracketNotFound(MAX_DOUBLINGS));
        }
        lo = hi;
        hi *= 2.0;
        steps += 1;
    }
    let bracket = (lo, hi);
    let mut bisections = 0;
    let d_star = loop {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        bisections += 1;
        if (fm - 1.0).abs() <= tol_root || hi - lo <= tol_root * mid || bisections >= MAX_BISECTIONS
        {
            break mid;
        }
        if fm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    let q = mc.q(d_star)?;
    let fs = mc.f(d_star)?;
    let h = 1e-4 * d_star;
    let slope = (mc.f(d_star + h)?.mean - mc.f(d_star - h)?.mean) / (2.0 * h);
    let model = &mc.setup.model;
    let predicted_weight = predicted_weight(model.kind(), model.u(), Some(d_star), None)?;
    Ok(MasterEquationResult {
        d_star,
        bracket,
        f_residual: (fs.mean - 1.0).abs(),
        mc_reps: mc.reps.len(),
        mc_stderr: q.stderr,
        q_star: q.mean,
        d_star_stderr: fs.stderr / slope.abs(),
        predicted_weight,
        kind: model.kind(),
        bisections,
    })
}

/// Limiting weight predicted for `kind`: `1/phi^{-1}(1)` (ME), `1/tau_p` (TE),
/// `u(d*)` (MRE), `1/d*` (TRE).
pub fn predicted_weight(
    kind: EstimatorKind,
    u: Option<&UFunction>,
    d_star: Option<f64>,
    tau_p: Option<f64>,
) -> Result<f64> {
    let missing =
        |what: &str| Error::InvalidInput(format!("{} prediction needs {what}", kind.short_name()));
    match kind {
        EstimatorKind::Maronna => {
            let u = u.ok_or_else(|| missing("a u-function"))?;
            let d0 = u.d0().ok_or_else(|| {
                Error::Existence(format!("phi never reaches 1 for u={}", u.name()))
            })?;
            Ok(1.0 / d0)
        }
        EstimatorKind::Tyler => {
            let tau = tau_p.ok_or_else(|| missing("tau_p"))?;
            check_positive("tau_p", tau)?;
            Ok(1.0 / tau)
        }
        EstimatorKind::MaronnaRegularized => {
            let u = u.ok_or_else(|| missing("a u-function"))?;
            let d = d_star.ok_or_else(|| missing("d*"))?;
            check_positive("d*", d)?;
            Ok(u.u(d))
        }
        EstimatorKind::TylerRegularized => {
            let d = d_star.ok_or_else(|| missing("d*"))?;
            check_positive("d*", d)?;
            Ok(1.0 / d)
        }
    }
}

/// `1/tau_p` for a shape matrix.
pub fn tyler_predicted_weight(shape: &ScatterMatrix) -> Result<f64> {
    predicted_weight(EstimatorKind::Tyler, None, None, Some(shape.tau()))
}
