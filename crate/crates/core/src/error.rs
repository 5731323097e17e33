use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor / parameter-vector dimension mismatch.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// No real positive flight-time root for the requested throw.
    #[error("unsolvable throw: no positive flight time from z0={z0}, vz={vz}")]
    UnsolvableThrow { z0: f64, vz: f64 },

    /// Rejection sampling failed to produce an accepted throw.
    #[error("throw sampling exceeded {attempts} attempts; bounds are inconsistent with the acceptance band")]
    ThrowSampling { attempts: usize },

    /// `step` called on an episode that already terminated.
    #[error("episode already terminated")]
    EpisodeTerminated,

    /// Trajectory too short for the requested finite-difference metric.
    #[error("episode too short for smoothness metrics: {steps} steps")]
    EpisodeTooShort { steps: usize },

    /// Checkpoint contents do not match the requested architecture.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
