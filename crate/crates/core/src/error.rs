use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite {what} for equation {h} at x = {x:?}")]
    NonFiniteCoefficient { what: &'static str, h: usize, x: Vec<f64> },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("synthesis failed: {constraint}{}", fmt_index(*.k))]
    Synthesis { constraint: String, k: Option<usize> },

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error("value not representable as f64 (log-value {log_value})")]
    Saturation { log_value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ledger item ({item}) is not finite at t = {t}, x = {x:?}")]
    LedgerNonFinite { item: &'static str, t: f64, x: Vec<f64> },

    #[error("diffusion of equation {h} is not elliptic at node {x:?}")]
    NonElliptic { h: usize, x: Vec<f64> },

    #[error("linear solve did not converge: {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_index(k: Option<usize>) -> String {
    match k {
        Some(k) => format!(" (component k = {})", k + 1),
        None => String::new(),
    }
}
