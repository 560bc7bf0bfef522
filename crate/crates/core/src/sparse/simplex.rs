//! Dense two-phase tableau simplex for `min c^T x  s.t.  A x <= b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, ties in the
//! ratio test go to the lowest basic index), so the method terminates on
//! degenerate problems. After the last pivot the basic solution is recomputed
//! from the original data with an LU solve to remove accumulated round-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// (m + 1) x (cols + 1); last row holds reduced costs, last column the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.cols)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.t[(row, col)];
        let width = self.cols + 1;
        for k in 0..width {
            self.t[(row, k)] /= pv;
        }
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for k in 0..width {
                    let v = self.t[(row, k)];
                    self.t[(i, k)] -= f * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Load costs into the objective row and price out the basic columns.
    fn set_objective(&mut self, cost: &[f64]) {
        for (k, &c) in cost.iter().enumerate().take(self.cols) {
            self.t[(self.m, k)] = c;
        }
        self.t[(self.m, self.cols)] = 0.0;
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for k in 0..=self.cols {
                    let v = self.t[(i, k)];
                    self.t[(self.m, k)] -= cb * v;
                }
            }
        }
    }

    /// Iterate to optimality over columns where `allowed` is true.
    fn optimize(&mut self, allowed: &[bool], max_pivots: usize) -> Result<()> {
        let scale = 1.0
            + (0..self.cols)
                .map(|k| self.t[(self.m, k)].abs())
                .fold(0.0, f64::max);
        loop {
            let entering =
                (0..self.cols).find(|&k| allowed[k] && self.t[(self.m, k)] < -PIVOT_TOL * scale);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-14 * best.abs().max(1.0)
                                || (ratio <= best + 1e-14 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
            if self.pivots > max_pivots {
                return Err(Error::IterationLimit(format!(
                    "simplex exceeded {max_pivots} pivots"
                )));
            }
        }
    }
}

/// Solve `min c^T x` subject to `a x <= b` and `x >= 0`.
pub fn minimize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Result<LpSolution> {
    let (m, n) = a.shape();
    if c.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} costs and {m} bounds"),
            found: format!("{} costs and {} bounds", c.len(), b.len()),
        });
    }
    if c.iter().chain(b).chain(a.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "linear program data must be finite".into(),
        ));
    }
    let flipped: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let cols = n + m + flipped.len();
    let mut t = DMatrix::zeros(m + 1, cols + 1);
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            t[(i, k)] = sign * a[(i, k)];
        }
        t[(i, n + i)] = sign;
        t[(i, cols)] = sign * b[i];
        if sign < 0.0 {
            t[(i, n + m + art)] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let original = t.rows(0, m).into_owned();
    let mut tab = Tableau {
        t,
        basis,
        m,
        cols,
        pivots: 0,
    };
    let max_pivots = 50 * (m + cols).max(10);

    if !flipped.is_empty() {
        let mut cost1 = vec![0.0; cols];
        for v in cost1.iter_mut().skip(n + m) {
            *v = 1.0;
        }
        tab.set_objective(&cost1);
        tab.optimize(&vec![true; cols], max_pivots)?;
        let infeasibility = -tab.t[(m, cols)];
        let bscale = 1.0 + b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if infeasibility > FEAS_TOL * bscale {
            return Err(Error::Infeasible(format!(
                "phase one ended with infeasibility {infeasibility:.3e}"
            )));
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(col) = (0..n + m).find(|&k| tab.t[(i, k)].abs() > PIVOT_TOL) {
                    tab.pivot(i, col);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(c);
    tab.set_objective(&cost2);
    let allowed: Vec<bool> = (0..cols).map(|k| k < n + m).collect();
    tab.optimize(&allowed, max_pivots)?;

    // recompute the basic solution from the original rows
    let bmat = DMatrix::from_fn(m, m, |i, k| original[(i, tab.basis[k])]);
    let rhs = DVector::from_fn(m, |i, _| original[(i, cols)]);
    let xb = bmat
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DVector::from_fn(m, |i, _| tab.rhs(i)));
    let mut x = vec![0.0; n];
    for (k, &col) in tab.basis.iter().enumerate() {
        if col < n {
            x[col] = xb[k].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution {
        x,
        objective,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let sol = minimize(&[-3.0, -5.0], &a, &[4.0, 12.0, 18.0]).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
        assert!((sol.objective + 36.0).abs() < 1e-12);
    }

    #[test]
    fn phase_one_with_lower_bounds() {
        // min x + y s.t. x + y >= 2, x >= 0.5 -> objective 2
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, 0.0]);
        let sol = minimize(&[1.0, 1.0], &a, &[-2.0, -0.5]).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!(sol.x[0] >= 0.5 - 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x <= 1 and x >= 2
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert!(matches!(
            minimize(&[1.0], &a, &[1.0, -2.0]),
            Err(Error::Infeasible(_))
        ));
        // min -x s.t. -x <= 0
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(matches!(
            minimize(&[-1.0], &a, &[0.0]),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the largest-coefficient rule
        let a = DMatrix::from_row_slice(
            3,
            4,
            &[
                0.25, -8.0, -1.0, 9.0, 0.5, -12.0, -0.5, 3.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        let sol = minimize(&[-0.75, 20.0, -0.5, 6.0], &a, &[0.0, 0.0, 1.0]).unwrap();
        assert!((sol.objective + 1.25).abs() < 1e-12, "{}", sol.objective);
    }

    #[test]
    fn dimension_checks() {
        let a = DMatrix::zeros(2, 2);
        assert!(minimize(&[1.0], &a, &[1.0, 1.0]).is_err());
        assert!(minimize(&[f64::NAN, 1.0], &a, &[1.0, 1.0]).is_err());
    }
}
