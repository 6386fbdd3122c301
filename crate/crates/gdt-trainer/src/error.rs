use std::path::PathBuf;

use gdt_datasets::DatasetError;
use gdt_envs::EnvError;
use gdt_model::ModelError;
use gdt_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Env(#[from] EnvError),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("training aborted: loss is not finite at update {update}")]
    NanLoss { update: usize },

    #[error("invalid train config: {0}")]
    Invalid(String),

    #[error("model does not fit the dataset: {0}")]
    Incompatible(String),

    #[error("dataset not found: {path}; generate it with `{hint}`")]
    MissingDataset { path: PathBuf, hint: String },
}
