use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point outside the model domain (row {row})")]
    OutsideDomain { row: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("iterative solve did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    #[error("inexact subproblem solve (residual {residual:.3e})")]
    InexactSubproblem { residual: f64 },

    #[error("supremum is unbounded")]
    Unbounded,

    #[error("undefined at coincident points")]
    Coincident,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
