use thiserror::Error;

use crate::field::VertexField;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field has {found} entries but the graph has {expected} vertices")]
    Misaligned { expected: usize, found: usize },

    #[error("non-finite value {value} at vertex {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The singular Poisson problem was handed data with nonzero integral.
    #[error("right-hand side is not mean-zero: integral = {integral:e}")]
    Incompatible { integral: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("energy is not finite (exponential saturation)")]
    EnergyOverflow,

    #[error("descent budget exhausted after {steps} steps, gradient sup-norm {grad_norm:e}")]
    DescentBudget {
        steps: usize,
        grad_norm: f64,
        last: Box<VertexField>,
    },

    #[error("start point is not critical: gradient sup-norm {grad_norm:e} > {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },

    /// `log` holds `(lambda, status)` for every probe run.
    #[error("no converging probe below the cap lambda = {cap:e} ({} probes)", log.len())]
    ProbeCap { cap: f64, log: Vec<(f64, &'static str)> },

    #[error("probe at lambda = {lambda} is inconclusive; bracket cannot be refined ({} probes)", log.len())]
    InconclusiveProbe { lambda: f64, log: Vec<(f64, &'static str)> },

    #[error("graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
