use nalgebra::DMatrix;

use super::solver::{EstimatorKind, FixedPointMap, ScatterEstimate};
use super::UFunction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Dataset;

/// Rank proxy for the Kent-Tyler condition: `n > p` and full column rank.
///
/// The subspace-counting condition itself is not checked.
pub fn check_te_existence(data: &Dataset) -> bool {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return false;
    }
    let sv = data.samples().clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return false;
    }
    let tol = n.max(p) as f64 * f64::EPSILON * top;
    sv.iter().filter(|&&s| s > tol).count() == p
}

/// Interference map `h_j(d) = p^{-1} x_j^T ((1/n) sum_i u(d_i) x_i x_i^T)^{-1} x_j`.
pub fn interference_h(d: &[f64], data: &Dataset, u: &UFunction) -> Result<Vec<f64>> {
    if d.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} entries", data.n()),
            found: format!("{}", d.len()),
        });
    }
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("interference map needs d > 0".into()));
    }
    let w: Vec<f64> = d.iter().map(|&di| u.u(di)).collect();
    let xt = data.samples().transpose();
    let g = linalg::weighted_gram(&xt, data.samples(), &w);
    linalg::quadratic_forms(&g, &xt)
        .map_err(|_| Error::Singular("weighted covariance in interference map".into()))
}

/// `-sum_i log w_i + (n/p) log det(sum_i w_i x_i x_i^T)` on the simplex `sum w = n`.
pub fn tyler_objective(w: &[f64], data: &Dataset) -> Result<f64> {
    let (n, p) = (data.n(), data.p());
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} weights"),
            found: format!("{}", w.len()),
        });
    }
    if w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("objective needs w > 0".into()));
    }
    let total: f64 = w.iter().sum();
    if (total - n as f64).abs() > 1e-8 * n as f64 {
        return Err(Error::InvalidInput(format!(
            "weights must sum to n={n}, got {total}"
        )));
    }
    let xt = data.samples().transpose();
    // weighted_gram divides by n
    let g = linalg::weighted_gram(&xt, data.samples(), w) * n as f64;
    let logdet = linalg::log_det_spd(&g, "weighted scatter sum")
        .map_err(|_| Error::Singular("weighted scatter sum".into()))?;
    let log_sum: f64 = w.iter().map(|v| v.ln()).sum();
    Ok(-log_sum + (n as f64 / p as f64) * logdet)
}

/// Rescale Tyler weights onto the simplex `sum w = n` (the objective's domain).
pub fn tyler_simplex_weights(weights: &[f64]) -> Vec<f64> {
    let n = weights.len() as f64;
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| n * w / total).collect()
}

/// Relative Frobenius residual of the defining equation of `est.kind`.
pub fn fixed_point_residual(est: &ScatterEstimate, data: &Dataset) -> Result<f64> {
    if est.matrix.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", data.p()),
            found: format!("{0}x{0}", est.matrix.p()),
        });
    }
    if est.kind.uses_u() && est.u.is_none() {
        return Err(Error::InvalidInput("estimate carries no u-function".into()));
    }
    let map = FixedPointMap::new(data, est.kind, est.u.as_ref(), est.alpha);
    let value = map.eval(est.matrix.as_matrix())?;
    Ok(linalg::relative_frobenius(
        &value.rhs,
        est.matrix.as_matrix(),
    ))
}

/// Weights recomputed from a scatter matrix through the defining formula.
pub fn weights_from_matrix(
    matrix: &DMatrix<f64>,
    data: &Dataset,
    kind: EstimatorKind,
    u: Option<&UFunction>,
) -> Result<Vec<f64>> {
    let d = linalg::quadratic_forms(matrix, &data.samples().transpose())?;
    Ok(match (kind, u) {
        (EstimatorKind::Tyler | EstimatorKind::TylerRegularized, _) => {
            d.iter().map(|v| 1.0 / v).collect()
        }
        (_, Some(u)) => d.iter().map(|&v| u.u(v)).collect(),
        (_, None) => return Err(Error::InvalidInput("u-function required".into())),
    })
}
