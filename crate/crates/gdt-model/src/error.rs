use gdt_tensor::{CheckpointError, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid trajectory window: {0}")]
    Window(String),

    #[error("timestep {timestep} out of range: the embedding table holds {max} entries")]
    TimestepRange { timestep: usize, max: usize },

    #[error("action loss over a fully masked window")]
    AllMasked,

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("checkpoint is missing parameter {0:?}")]
    MissingParam(String),

    #[error("checkpoint holds unexpected parameter {0:?}")]
    UnexpectedParam(String),

    #[error("parameter {name:?} has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}
