use thiserror::Error;

use crate::dsl::DslError;

/// Errors raised by the solver toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range (length {len})")]
    Index { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error at t = {t}, component {component}: {source}")]
    Evaluation {
        t: f64,
        component: usize,
        #[source]
        source: DslError,
    },

    #[error("hypothesis violated at component {component}: {detail}")]
    HypothesisViolation { component: usize, detail: String },

    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("component {component} reads x[{index}] outside its coupling band [{lo}, {hi}]")]
    BandViolation {
        component: usize,
        index: i64,
        lo: i64,
        hi: i64,
    },

    #[error(transparent)]
    Dsl(#[from] DslError),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
