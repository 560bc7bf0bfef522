//! Dense kernels shared by the estimators and diagnostics.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Inverse of the lower Cholesky factor of `m`, so that `m^{-1} = L^{-T} L^{-1}`.
pub(crate) fn inverse_cholesky_factor(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = cholesky(m, what)?;
    let l = chol.l();
    let p = m.nrows();
    l.solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// `p^{-1} x_i^T m^{-1} x_i` for every column `x_i` of `xt` (p x n).
///
/// One factorization of `m` is shared by all n forms; the triangular inverse
/// turns the n solves into a single matrix product.
pub(crate) fn quadratic_forms(m: &DMatrix<f64>, xt: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = m.nrows();
    let linv = inverse_cholesky_factor(m, "quadratic form matrix")?;
    let z = linv * xt;
    Ok(z.column_iter()
        .map(|c| c.norm_squared() / p as f64)
        .collect())
}

/// `(1/n) sum_i w_i x_i x_i^T` where `xt` is p x n and `x` its transpose.
pub(crate) fn weighted_gram(xt: &DMatrix<f64>, x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let n = xt.ncols();
    let mut scaled = xt.clone();
    for (mut col, &wi) in scaled.column_iter_mut().zip(w) {
        col *= wi;
    }
    let mut g = scaled * x;
    g /= n as f64;
    symmetrize(&mut g);
    g
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `||a - b||_F / ||b||_F`.
pub(crate) fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm();
    let diff = (a - b).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

/// Log-determinant of an SPD matrix via its Cholesky factor.
pub(crate) fn log_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let ev: DVector<f64> = m.clone().symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_forms_match_direct_solve() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let xt = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 2.0, 0.5, 0.0, 3.0]);
        let q = quadratic_forms(&m, &xt).unwrap();
        let inv = m.clone().try_inverse().unwrap();
        for (i, qi) in q.iter().enumerate() {
            let x = xt.column(i);
            let direct = (x.transpose() * &inv * x)[(0, 0)] / 3.0;
            assert!((qi - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn weighted_gram_is_weighted_outer_sum() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, -1.0]);
        let xt = x.transpose();
        let g = weighted_gram(&xt, &x, &[2.0, 0.5]);
        // (2*[1,2][1,2]^T + 0.5*[3,-1][3,-1]^T)/2
        assert!((g[(0, 0)] - (2.0 + 4.5) / 2.0).abs() < 1e-15);
        assert!((g[(0, 1)] - (4.0 - 1.5) / 2.0).abs() < 1e-15);
        assert!((g[(1, 1)] - (8.0 + 0.5) / 2.0).abs() < 1e-15);
    }
}
