use thiserror::Error;

/// Errors produced while building models or running protocols.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("index {index} out of range 1..={max} for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("operation not supported: {0}")]
    Capability(String),

    #[error("gap closes at the requested parameters: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no zero-energy subspace found")]
    EmptySubspace,

    #[error("empty input")]
    EmptyInput,

    #[error("phase is unreliable at fidelity {fidelity:.4}")]
    UnreliablePhase { fidelity: f64 },

    #[error(
        "no transfer time up to {t_max} reaches the threshold (best fidelity {best_fidelity:.5} at t = {best_time})"
    )]
    NotFound {
        t_max: f64,
        best_time: f64,
        best_fidelity: f64,
    },

    #[error("optimization failed: best fidelity {best_fidelity:.5} with controls {best_controls:?}")]
    OptimizationFailed {
        best_controls: Vec<f64>,
        best_fidelity: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
