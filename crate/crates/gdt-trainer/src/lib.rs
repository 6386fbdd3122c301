mod config;
mod error;
mod eval;
mod sample;
mod train;

pub use config::{TargetReturn, TrainConfig};
pub use error::TrainerError;
pub use eval::{evaluate, Agent, DTAgent, EvalReport, OracleAgent, RandomAgent, SeedEval};
pub use sample::{sample_batch, state_norm, window_at};
pub use train::{train, TrainOutcome};
