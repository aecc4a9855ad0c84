use thiserror::Error;

/// Errors raised by the signal chain and the numeric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input shape: {0}")]
    Shape(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("threshold solver: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
