//! Sparse shape estimation: hard-thresholded Tyler estimator and CLIME
//! precision estimation with a scatter proxy.

mod simplex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, SolverConfig};
use crate::model::{self, Dataset, NormReport, ScatterMatrix};

pub use simplex::{minimize as simplex_minimize, LpSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseMethod {
    Threshold,
    Clime,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseEstimate {
    #[serde(serialize_with = "model::serialize_rows")]
    pub matrix: DMatrix<f64>,
    pub method: SparseMethod,
    /// Threshold `t` or CLIME `lambda`.
    pub parameter: f64,
    /// Norms of the matrix the method started from.
    pub input_norms: NormReport,
    /// Norms of `matrix - truth` when a truth was supplied.
    pub error_vs_truth: Option<NormReport>,
}

/// Entrywise `M_ij * 1{|M_ij| >= t}`.
pub fn hard_threshold(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must be >= 0, got {t}"
        )));
    }
    Ok(m.map(|v| if v.abs() >= t { v } else { 0.0 }))
}

/// `t = c1 * scale * sqrt(log p / n)`.
///
/// `n` and `p` are real so the rule can be evaluated off the integer grid.
pub fn choose_threshold(n: f64, p: f64, scale: f64, c1: f64) -> Result<f64> {
    if !(n > 0.0) || !(p > 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold rule needs n > 0 and p > 1, got n={n}, p={p}"
        )));
    }
    if !(scale > 0.0) || !(c1 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold rule needs scale > 0 and c1 >= 0, got scale={scale}, c1={c1}"
        )));
    }
    Ok(c1 * scale * (p.ln() / n).sqrt())
}

fn check_truth(truth: &DMatrix<f64>, p: usize) -> Result<()> {
    if truth.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{p} truth"),
            found: format!("{}x{}", truth.nrows(), truth.ncols()),
        });
    }
    Ok(())
}

/// Tyler's estimator thresholded at `c1 * ||S_Tyl|| * sqrt(log p / n)`.
///
/// Tyler's estimator is normalized to trace `p`, so a supplied `truth` is
/// rescaled to trace `p` before the error is measured.
pub fn sparse_cov_estimate(
    data: &Dataset,
    c1: f64,
    truth: Option<&ScatterMatrix>,
    cfg: &SolverConfig,
) -> Result<SparseEstimate> {
    let est = estimators::tyler(data, cfg)?;
    let input_norms = model::matrix_norms(est.matrix.as_matrix());
    let t = choose_threshold(
        data.n() as f64,
        data.p() as f64,
        input_norms.operator_norm,
        c1,
    )?;
    let matrix = hard_threshold(est.matrix.as_matrix(), t)?;
    let error_vs_truth = match truth {
        Some(truth) => {
            check_truth(truth.as_matrix(), data.p())?;
            let target = truth.normalized_to_trace_p();
            Some(model::matrix_norms(&(&matrix - target.as_matrix())))
        }
        None => None,
    };
    Ok(SparseEstimate {
        matrix,
        method: SparseMethod::Threshold,
        parameter: t,
        input_norms,
        error_vs_truth,
    })
}

/// One CLIME column: `min ||w||_1` subject to `||S w - e_j||_inf <= lambda`.
///
/// Solved as a linear program in `w = w+ - w-` with `w+, w- >= 0`.
pub fn clime_column(s_hat: &ScatterMatrix, j: usize, lambda: f64) -> Result<DVector<f64>> {
    let p = s_hat.p();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let s = s_hat.as_matrix();
    // rows:  S w+ - S w- <= lambda + e_j,  -S w+ + S w- <= lambda - e_j
    let a = DMatrix::from_fn(2 * p, 2 * p, |r, c| {
        let v = s[(r % p, c % p)];
        let sign = if (r < p) == (c < p) { 1.0 } else { -1.0 };
        sign * v
    });
    let b: Vec<f64> = (0..2 * p)
        .map(|r| {
            let e = if r % p == j { 1.0 } else { 0.0 };
            if r < p {
                lambda + e
            } else {
                lambda - e
            }
        })
        .collect();
    let sol = simplex::minimize(&vec![1.0; 2 * p], &a, &b).map_err(|e| match e {
        Error::Infeasible(msg) => {
            Error::Infeasible(format!("CLIME column {j} at lambda={lambda}: {msg}"))
        }
        other => other,
    })?;
    Ok(DVector::from_fn(p, |k, _| sol.x[k] - sol.x[p + k]))
}

/// `max_k |(S w - e_j)_k|`.
pub fn clime_constraint_violation(s_hat: &ScatterMatrix, j: usize, w: &DVector<f64>) -> f64 {
    let mut r = s_hat.as_matrix() * w;
    r[j] -= 1.0;
    r.amax()
}

/// Keep the smaller-magnitude entry of each `(i, j)`, `(j, i)` pair.
pub fn symmetrize_min_magnitude(w: &DMatrix<f64>) -> DMatrix<f64> {
    let p = w.nrows();
    let mut out = w.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (w[(i, j)], w[(j, i)]);
            let v = if a.abs() <= b.abs() { a } else { b };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// CLIME precision estimate from a scatter proxy, symmetrized entrywise.
pub fn clime(
    s_hat: &ScatterMatrix,
    lambda: f64,
    truth_precision: Option<&DMatrix<f64>>,
) -> Result<SparseEstimate> {
    let p = s_hat.p();
    if let Some(t) = truth_precision {
        check_truth(t, p)?;
    }
    let columns = (0..p)
        .into_par_iter()
        .map(|j| clime_column(s_hat, j, lambda))
        .collect::<Result<Vec<_>>>()?;
    let raw = DMatrix::from_columns(&columns);
    let matrix = symmetrize_min_magnitude(&raw);
    let error_vs_truth = truth_precision.map(|t| model::matrix_norms(&(&matrix - t)));
    Ok(SparseEstimate {
        matrix,
        method: SparseMethod::Clime,
        parameter: lambda,
        input_norms: model::matrix_norms(s_hat.as_matrix()),
        error_vs_truth,
    })
}

/// Tridiagonal matrix with unit diagonal and constant off-diagonal `rho`.
pub fn tridiagonal(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            rho
        } else {
            0.0
        }
    })
}
