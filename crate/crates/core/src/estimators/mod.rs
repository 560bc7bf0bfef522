//! Fixed-point solvers for Tyler's and Maronna's M-estimators of scatter
//! and their regularized variants, plus the objects used to check them.
//!
//! | kind | equation | weight |
//! |------|----------|--------|
//! | TE  | `S = (1/n) sum w_i x_i x_i^T`, `tr S = p` | `1/d_i` |
//! | ME  | `S = (1/n) sum w_i x_i x_i^T` | `u(d_i)` |
//! | TRE | `S = (1+a)^{-1} (1/n) sum w_i x_i x_i^T + a/(1+a) I` | `1/d_i` |
//! | MRE | same as TRE | `u(d_i)` |
//!
//! with `d_i = p^{-1} x_i^T S^{-1} x_i`.

mod diagnostics;
mod solver;
mod ufunction;

pub use diagnostics::{
    check_te_existence, fixed_point_residual, interference_h, tyler_objective,
    tyler_simplex_weights, weights_from_matrix,
};
pub use solver::{
    estimate, maronna, maronna_regularized, tyler, tyler_regularized, EstimatorKind,
    ScatterEstimate, SolverConfig,
};
pub use ufunction::UFunction;
