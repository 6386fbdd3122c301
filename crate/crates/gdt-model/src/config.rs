use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Decision-transformer hyperparameters. `context_length` counts timesteps;
/// every timestep contributes three tokens (return-to-go, state, action).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DTConfig {
    pub context_length: usize,
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
    pub max_timestep: usize,
    pub dropout: f64,
}

impl DTConfig {
    /// The continuous-control recipe: K=20, 128-wide, 3 layers, one head.
    pub fn defaults(
        state_dim: usize,
        action_dim: usize,
        goal_dim: usize,
        max_timestep: usize,
    ) -> Self {
        Self {
            context_length: 20,
            embed_dim: 128,
            n_layers: 3,
            n_heads: 1,
            state_dim,
            action_dim,
            goal_dim,
            max_timestep,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("context_length", self.context_length),
            ("embed_dim", self.embed_dim),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("state_dim", self.state_dim),
            ("action_dim", self.action_dim),
            ("goal_dim", self.goal_dim),
            ("max_timestep", self.max_timestep),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.embed_dim % self.n_heads != 0 {
            return Err(ModelError::Config(format!(
                "embed_dim {} not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// State vectors are flattened observation ‖ desired goal ‖ achieved goal.
    pub fn flat_state_dim(&self) -> usize {
        self.state_dim + 2 * self.goal_dim
    }

    /// Closed-form parameter count; construction must agree with this.
    pub fn param_count(&self) -> usize {
        let d = self.embed_dim;
        let f = self.flat_state_dim();
        let a = self.action_dim;
        let h = 4 * d;
        let embeds = (d + d) + (f * d + d) + (a * d + d) + self.max_timestep * d;
        let per_layer = 2 * d            // first layer norm
            + 4 * (d * d + d)            // query, key, value, output projections
            + 2 * d                      // second layer norm
            + (d * h + h) + (h * d + d); // feed-forward pair
        let tail = 2 * d + (d * a + a);
        embeds + self.n_layers * per_layer + tail
    }
}

/// Per-dimension statistics applied to flat states before embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StateNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn apply(&self, state: &mut [f64]) {
        for (x, (m, s)) in state.iter_mut().zip(self.mean.iter().zip(&self.std)) {
            *x = (*x - m) / s;
        }
    }
}
