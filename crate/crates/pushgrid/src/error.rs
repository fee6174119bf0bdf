//! Library-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator, trainer, and evaluation bench.
#[derive(Debug, Error)]
pub enum Error {
    /// Reset sampling exhausted its rejection budget for the requested scenario.
    #[error("scenario '{scenario}' infeasible: no valid layout after {attempts} attempts")]
    ScenarioInfeasible { scenario: String, attempts: usize },

    /// An action was outside the discrete bin range.
    #[error("invalid action bins ({0}, {1}): bins must be in 0..=10")]
    InvalidAction(i64, i64),

    /// `step` was called on an environment whose episode already terminated.
    #[error("step called on a finished episode; call reset first")]
    EpisodeFinished,

    /// Vectorized call with mismatched batch length.
    #[error("batch length mismatch: {expected} environments, {got} items")]
    BatchLength { expected: usize, got: usize },

    /// A numeric fault (non-finite loss or state) aborted training.
    #[error("training fault: {0}")]
    TrainingFault(String),

    /// Checkpoint file is malformed or from an incompatible version.
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    /// Checkpoint architecture does not match the requested configuration.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    /// Unknown evaluation scenario name.
    #[error("unknown scenario '{name}'; known scenarios: {known}")]
    UnknownScenario { name: String, known: String },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed trajectory or episode log input.
    #[error("trajectory format error: {0}")]
    TrajectoryFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
