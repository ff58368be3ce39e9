//! Crate-wide error type.

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be parsed; the message names the offending field.
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    /// Data failed an invariant check after parsing or construction.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller violated an operation precondition (dimension mismatch,
    /// out-of-range argument, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The problem instance is degenerate and has no well-defined answer.
    #[error("ill-posed: {0}")]
    IllPosed(String),

    /// Simulation produced a non-finite state.
    #[error("simulation diverged at step {step} (t = {time:.4} s)")]
    SimulationDiverged { step: usize, time: f64 },

    /// A trajectory optimization run could not produce any valid candidate.
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A pipeline stage was invoked out of order or with missing inputs.
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

pub type Result<T> = std::result::Result<T, Error>;
