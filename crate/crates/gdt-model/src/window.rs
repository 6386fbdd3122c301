use crate::config::DTConfig;
use crate::error::ModelError;

/// A length-K slice of a trajectory, left-padded: `mask[t]` is false on
/// padding rows and true on real ones, and once true it stays true.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryWindow {
    pub returns_to_go: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub timesteps: Vec<usize>,
    pub mask: Vec<bool>,
}

impl TrajectoryWindow {
    pub fn validate(&self, config: &DTConfig) -> Result<(), ModelError> {
        let k = config.context_length;
        for (name, len) in [
            ("returns_to_go", self.returns_to_go.len()),
            ("states", self.states.len()),
            ("actions", self.actions.len()),
            ("timesteps", self.timesteps.len()),
            ("mask", self.mask.len()),
        ] {
            if len != k {
                return Err(ModelError::Window(format!(
                    "{name} holds {len} entries, context length is {k}"
                )));
            }
        }
        let f = config.flat_state_dim();
        if let Some(s) = self.states.iter().find(|s| s.len() != f) {
            return Err(ModelError::Window(format!(
                "state vector of length {}, expected {f}",
                s.len()
            )));
        }
        if let Some(a) = self.actions.iter().find(|a| a.len() != config.action_dim) {
            return Err(ModelError::Window(format!(
                "action vector of length {}, expected {}",
                a.len(),
                config.action_dim
            )));
        }
        let mut seen_real = false;
        for t in 0..k {
            if self.mask[t] {
                seen_real = true;
            } else if seen_real {
                return Err(ModelError::Window(
                    "padding must be left-aligned".into(),
                ));
            }
        }
        for t in 0..k {
            if self.timesteps[t] >= config.max_timestep {
                return Err(ModelError::TimestepRange {
                    timestep: self.timesteps[t],
                    max: config.max_timestep,
                });
            }
            if t > 0 && self.mask[t - 1] && self.mask[t] && self.timesteps[t] != self.timesteps[t - 1] + 1
            {
                return Err(ModelError::Window(format!(
                    "timesteps must increase by 1 over real positions, got {} then {}",
                    self.timesteps[t - 1],
                    self.timesteps[t]
                )));
            }
        }
        Ok(())
    }

    pub fn n_real(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}
