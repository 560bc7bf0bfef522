//! Robust M-estimators of scatter (Tyler, Maronna and their regularized
//! variants), a Monte Carlo solver for the scalar equation that predicts
//! their weights in high dimension, concentration experiments, and
//! thresholded / CLIME sparse shape estimation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod lab;
mod linalg;
pub mod master;
pub mod model;
pub mod samplers;
pub mod sparse;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, ScatterEstimate, SolverConfig, UFunction};
pub use model::{Dataset, ScatterMatrix};
