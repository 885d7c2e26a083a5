use thiserror::Error;

use crate::data::AssumptionReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is not observable: rank {rank} of {n} after {horizon} steps")]
    Unobservable { rank: usize, n: usize, horizon: usize },

    #[error("data assumptions violated")]
    AssumptionsViolated(Box<AssumptionReport>),

    #[error("insufficient columns: need at least {required}, have {available}")]
    InsufficientColumns { required: usize, available: usize },

    #[error(transparent)]
    Qp(#[from] QpError),

    #[error(
        "singular inner matrix (T = {columns}, lambda_g = {lambda_g}, bound {bound}, rcond {rcond:.3e})"
    )]
    SingularInnerMatrix {
        columns: usize,
        lambda_g: f64,
        bound: usize,
        rcond: f64,
    },

    #[error("initial window is not consistent with the data (residual {residual:.3e})")]
    InfeasibleWindow { residual: f64 },

    #[error("closed loop failed at step {step}: {source}")]
    ClosedLoopStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing block `{0}`")]
    MissingBlock(String),

    #[error("shape mismatch in block `{block}`: expected {expected}, found {found}")]
    ShapeMismatch {
        block: String,
        expected: String,
        found: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failures of the dense QP kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("infeasible bounds on variable {index}: lo {lo} > hi {hi}")]
    InfeasibleBox { index: usize, lo: f64, hi: f64 },

    #[error("equality and bound constraints admit no common point")]
    Infeasible,

    #[error("equality matrix is rank deficient (rank {rank} of {rows})")]
    RankDeficientEquality { rank: usize, rows: usize },

    #[error("reduced Hessian is singular along a constrained direction")]
    SingularReducedKkt,

    #[error("iteration limit of {limit} active-set changes exceeded")]
    IterationLimit { limit: usize },
}

pub(crate) fn dim_err(
    context: &'static str,
    expected: impl std::fmt::Display,
    got: impl std::fmt::Display,
) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
