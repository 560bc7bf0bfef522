//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Minimum of `||w||_1` over `{w : ||S w - e_j||_inf <= lambda}` by vertex
/// enumeration.
///
/// Inside each orthant the problem is a linear program over a polytope cut by
/// the hyperplanes `(S w)_l = [l == j] +- lambda` and `w_k = 0`, so an optimum
/// sits where `p` of those hyperplanes meet. Every such intersection is solved
/// directly and the feasible one with smallest l1 norm is returned.
pub fn clime_vertex_oracle(s: &DMatrix<f64>, j: usize, lambda: f64) -> Option<(f64, DVector<f64>)> {
    let p = s.nrows();
    // hyperplane h < 2p: row h % p of S at offset +lambda (h < p) or -lambda;
    // h >= 2p: coordinate w_{h - 2p} = 0
    let total = 3 * p;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut chosen = Vec::with_capacity(p);
    fn recurse(
        start: usize,
        total: usize,
        p: usize,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if chosen.len() == p {
            visit(chosen);
            return;
        }
        for h in start..total {
            // a row cannot be active at both offsets
            if h >= p && h < 2 * p && chosen.contains(&(h - p)) {
                continue;
            }
            chosen.push(h);
            recurse(h + 1, total, p, chosen, visit);
            chosen.pop();
        }
    }
    let mut visit = |set: &[usize]| {
        let mut a = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for (r, &h) in set.iter().enumerate() {
            if h < 2 * p {
                let l = h % p;
                a.set_row(r, &s.row(l));
                let e = if l == j { 1.0 } else { 0.0 };
                rhs[r] = if h < p { e + lambda } else { e - lambda };
            } else {
                a[(r, h - 2 * p)] = 1.0;
            }
        }
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(w) = lu.solve(&rhs) else { return };
        let mut resid = s * &w;
        resid[j] -= 1.0;
        if resid.amax() > lambda + 1e-9 {
            return;
        }
        let obj = w.lp_norm(1);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, w));
        }
    };
    recurse(0, total, p, &mut chosen, &mut visit);
    best
}

/// Bisection on a bracketing interval; independent of the library's root finders.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
