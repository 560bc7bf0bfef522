use thiserror::Error;

/// Errors raised by the estimators, samplers and pipelines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("existence condition violated: {0}")]
    Existence(String),

    #[error("degenerate sample {index}: norm {norm:e} is numerically zero")]
    DegenerateSample { index: usize, norm: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("linear program unbounded")]
    Unbounded,

    #[error("no bracket for the root after {0} doublings")]
    BracketNotFound(usize),

    #[error("experiment aborted at p={p}: {failures} of {reps} replicates failed")]
    TooManyFailures {
        p: usize,
        failures: usize,
        reps: usize,
    },

    #[error("iteration limit reached: {0}")]
    IterationLimit(String),
}

impl Error {
    /// Stable machine-readable code for each variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Singular(_) => "singular",
            Error::Existence(_) => "existence",
            Error::DegenerateSample { .. } => "degenerate_sample",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Infeasible(_) => "infeasible",
            Error::Unbounded => "unbounded",
            Error::BracketNotFound(_) => "bracket_not_found",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::IterationLimit(_) => "iteration_limit",
        }
    }

    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::Singular(_)
                | Error::Infeasible(_)
                | Error::Unbounded
                | Error::BracketNotFound(_)
                | Error::TooManyFailures { .. }
                | Error::IterationLimit(_)
                | Error::Existence(_)
                | Error::DegenerateSample { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
