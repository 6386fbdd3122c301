//! Goal-conditioned decision transformer: trajectory windows tokenized as
//! (return-to-go, state, action) triples, a pre-norm causal attention
//! stack, and a tanh action head read from the state-token positions.

mod config;
mod error;
mod model;
mod window;

pub use config::{DTConfig, StateNorm};
pub use error::ModelError;
pub use model::{action_loss, action_targets, BatchOutput, DTModel, ForwardMode};
pub use window::TrajectoryWindow;
