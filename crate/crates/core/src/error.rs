use thiserror::Error;

/// Errors raised by model construction, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("base station {bs} subproblem is infeasible: {reason}")]
    LocalInfeasible { bs: usize, reason: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
