use thiserror::Error;

/// Errors produced by measure computation, synthesis, observation and control.
#[derive(Debug, Error)]
pub enum Error {
    #[error("linear system is singular or numerically corrupted: {0}")]
    SingularSystem(String),

    #[error("Cesaro limit did not converge after {iterations} squarings (residual {residual:e})")]
    CesaroConvergence { iterations: usize, residual: f64 },

    #[error("supervisor synthesis did not stabilize within {0} iterations")]
    IterationCap(usize),

    #[error("disabling set is not contained in the controllable set: ({state}, {event})")]
    NotControllable { state: String, event: String },

    #[error("too many controllable transitions for exhaustive search: {0} > {max}", max = crate::synthesis::BRUTE_FORCE_MAX)]
    TooManyControllable(usize),

    #[error("perturbation {index} is invalid: {reason}")]
    InvalidPerturbation { index: usize, reason: String },

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown event `{0}`")]
    UnknownEvent(String),

    #[error("observed event `{0}` is impossible from the current estimate")]
    ImpossibleObservation(String),

    #[error("entangled state explosion: more than {0} states")]
    StateExplosion(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is invalid: {0}")]
    InvalidModel(String),

    #[error("model file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
