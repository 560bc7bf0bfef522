use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::UFunction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Dataset, ScatterMatrix};

/// Which of the four M-estimators produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "TE")]
    Tyler,
    #[serde(rename = "ME")]
    Maronna,
    #[serde(rename = "TRE")]
    TylerRegularized,
    #[serde(rename = "MRE")]
    MaronnaRegularized,
}

impl EstimatorKind {
    pub fn is_regularized(self) -> bool {
        matches!(
            self,
            EstimatorKind::TylerRegularized | EstimatorKind::MaronnaRegularized
        )
    }

    pub fn uses_u(self) -> bool {
        matches!(
            self,
            EstimatorKind::Maronna | EstimatorKind::MaronnaRegularized
        )
    }

    pub fn short_name(self) -> &'static str {
        match self {
            EstimatorKind::Tyler => "TE",
            EstimatorKind::Maronna => "ME",
            EstimatorKind::TylerRegularized => "TRE",
            EstimatorKind::MaronnaRegularized => "MRE",
        }
    }

    /// Accepts `tyler`/`te`, `maronna`/`me`, `tre`, `mre` in any case.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tyler" | "te" => Ok(EstimatorKind::Tyler),
            "maronna" | "me" => Ok(EstimatorKind::Maronna),
            "tre" | "tyler-regularized" => Ok(EstimatorKind::TylerRegularized),
            "mre" | "maronna-regularized" => Ok(EstimatorKind::MaronnaRegularized),
            _ => Err(Error::InvalidInput(format!("unknown estimator kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; identity when absent.
    pub init: Option<ScatterMatrix>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            init: None,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_init(mut self, init: ScatterMatrix) -> Self {
        self.init = Some(init);
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        if let Some(init) = &self.init {
            if init.p() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{p} initial matrix"),
                    found: format!("{0}x{0}", init.p()),
                });
            }
            init.require_spd("initial scatter matrix")?;
        }
        Ok(())
    }
}

/// Solution of one of the fixed-point equations plus its diagnostics.
#[derive(Debug, Clone)]
pub struct ScatterEstimate {
    pub matrix: ScatterMatrix,
    /// Per-sample weights recomputed from `matrix`.
    pub weights: Vec<f64>,
    pub kind: EstimatorKind,
    pub alpha: f64,
    pub iterations: usize,
    /// `||S - RHS(S)||_F / ||S||_F` at the returned matrix.
    pub residual: f64,
    pub converged: bool,
    /// Weight function for Maronna-type kinds.
    pub u: Option<UFunction>,
}

/// The right-hand side of one of the defining equations, bound to a dataset.
pub(crate) struct FixedPointMap<'a> {
    xt: DMatrix<f64>,
    x: &'a DMatrix<f64>,
    kind: EstimatorKind,
    u: Option<&'a UFunction>,
    alpha: f64,
}

pub(crate) struct MapValue {
    /// Un-normalized right-hand side.
    pub rhs: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl<'a> FixedPointMap<'a> {
    pub(crate) fn new(
        data: &'a Dataset,
        kind: EstimatorKind,
        u: Option<&'a UFunction>,
        alpha: f64,
    ) -> Self {
        Self {
            xt: data.samples().transpose(),
            x: data.samples(),
            kind,
            u,
            alpha,
        }
    }

    fn p(&self) -> usize {
        self.xt.nrows()
    }

    pub(crate) fn eval(&self, sigma: &DMatrix<f64>) -> Result<MapValue> {
        let d = linalg::quadratic_forms(sigma, &self.xt)?;
        let weights: Vec<f64> = match (self.kind, self.u) {
            (EstimatorKind::Tyler | EstimatorKind::TylerRegularized, _) => {
                d.iter().map(|di| 1.0 / di).collect()
            }
            (_, Some(u)) => d.iter().map(|&di| u.u(di)).collect(),
            (_, None) => return Err(Error::InvalidInput("u-function required".into())),
        };
        let mut rhs = linalg::weighted_gram(&self.xt, self.x, &weights);
        if self.kind.is_regularized() {
            for i in 0..self.p() {
                rhs[(i, i)] += self.alpha;
            }
            rhs /= 1.0 + self.alpha;
        }
        Ok(MapValue { rhs, weights })
    }
}

/// Picard iteration `S_{k+1} = RHS(S_k)` (trace-renormalized for TE).
fn picard(
    data: &Dataset,
    kind: EstimatorKind,
    u: Option<&UFunction>,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScatterEstimate> {
    let p = data.p();
    let map = FixedPointMap::new(data, kind, u, alpha);
    let trace_normalize = kind == EstimatorKind::Tyler;
    let mut sigma = match &cfg.init {
        Some(init) if trace_normalize => init.normalized_to_trace_p().into_matrix(),
        Some(init) => init.as_matrix().clone(),
        None => DMatrix::identity(p, p),
    };
    let mut iterations = 0;
    loop {
        let MapValue { rhs, weights } = map.eval(&sigma)?;
        let residual = linalg::relative_frobenius(&rhs, &sigma);
        let next = if trace_normalize {
            let t = rhs.trace();
            &rhs * (p as f64 / t)
        } else {
            rhs
        };
        let change = if trace_normalize {
            linalg::relative_frobenius(&next, &sigma)
        } else {
            residual
        };
        let converged = residual.max(change) <= cfg.tol;
        if converged || iterations >= cfg.max_iter {
            return Ok(ScatterEstimate {
                matrix: ScatterMatrix::new(sigma)?,
                weights,
                kind,
                alpha,
                iterations,
                residual,
                converged,
                u: u.cloned(),
            });
        }
        sigma = next;
        iterations += 1;
    }
}

fn require_n_greater_than_p(data: &Dataset, what: &str) -> Result<()> {
    if data.n() <= data.p() {
        return Err(Error::Existence(format!(
            "{what} needs n > p, got n={}, p={}",
            data.n(),
            data.p()
        )));
    }
    Ok(())
}

/// Rows with norm below `1e-14` times the largest row norm have no Tyler weight.
fn reject_degenerate_samples(data: &Dataset) -> Result<()> {
    let norms = data.row_norms();
    let max = norms.iter().copied().fold(0.0, f64::max);
    match norms.iter().position(|&r| r <= 1e-14 * max || r == 0.0) {
        Some(index) => Err(Error::DegenerateSample {
            index,
            norm: norms[index],
        }),
        None => Ok(()),
    }
}

/// Tyler's estimator normalized to `trace = p`.
pub fn tyler(data: &Dataset, cfg: &SolverConfig) -> Result<ScatterEstimate> {
    cfg.validate(data.p())?;
    require_n_greater_than_p(data, "Tyler's estimator")?;
    reject_degenerate_samples(data)?;
    if !super::check_te_existence(data) {
        return Err(Error::Existence(
            "sample matrix is rank deficient; Tyler's estimator does not exist".into(),
        ));
    }
    picard(data, EstimatorKind::Tyler, None, 0.0, cfg)
}

/// Maronna's estimator with weight function `u`.
pub fn maronna(data: &Dataset, u: &UFunction, cfg: &SolverConfig) -> Result<ScatterEstimate> {
    cfg.validate(data.p())?;
    require_n_greater_than_p(data, "Maronna's estimator")?;
    u.check_existence()?;
    picard(data, EstimatorKind::Maronna, Some(u), 0.0, cfg)
}

/// Regularized Tyler estimator; exists for `alpha > max(0, p/n - 1)`.
pub fn tyler_regularized(
    data: &Dataset,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScatterEstimate> {
    cfg.validate(data.p())?;
    let bound = (data.gamma() - 1.0).max(0.0);
    if !(alpha > bound) || !alpha.is_finite() {
        return Err(Error::Existence(format!(
            "regularized Tyler needs alpha > {bound}, got {alpha}"
        )));
    }
    reject_degenerate_samples(data)?;
    picard(data, EstimatorKind::TylerRegularized, None, alpha, cfg)
}

/// Regularized Maronna estimator; unique for every `alpha > 0`.
pub fn maronna_regularized(
    data: &Dataset,
    u: &UFunction,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScatterEstimate> {
    cfg.validate(data.p())?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Existence(format!(
            "regularized Maronna needs alpha > 0, got {alpha}"
        )));
    }
    picard(data, EstimatorKind::MaronnaRegularized, Some(u), alpha, cfg)
}

/// Dispatch on `kind`; `u` is required for the Maronna kinds and `alpha`
/// for the regularized ones.
pub fn estimate(
    data: &Dataset,
    kind: EstimatorKind,
    u: Option<&UFunction>,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScatterEstimate> {
    let need_u = || {
        u.ok_or_else(|| Error::InvalidInput(format!("{} needs a u-function", kind.short_name())))
    };
    match kind {
        EstimatorKind::Tyler => tyler(data, cfg),
        EstimatorKind::Maronna => maronna(data, need_u()?, cfg),
        EstimatorKind::TylerRegularized => tyler_regularized(data, alpha, cfg),
        EstimatorKind::MaronnaRegularized => maronna_regularized(data, need_u()?, alpha, cfg),
    }
}
