use thiserror::Error;

/// Errors produced by the solvers and their supporting linear algebra.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix is rank deficient at column {column} (|r_jj| = {pivot:e})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("linear system is singular or not positive definite (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("{routine} did not converge after {iterations} iterations (off-diagonal {residual:e})")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("step size too large: objective grew to {objective:e} (initial {initial:e})")]
    StepTooLarge { objective: f64, initial: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
