use gdt_tensor::AdamConfig;

use crate::error::TrainerError;

/// Evaluation-time return conditioning: the initial return-to-go fed to
/// the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetReturn {
    /// Best episode return observed in the training dataset.
    BestInDataset,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub n_updates: usize,
    pub eval_interval: usize,
    pub seed: u64,
    pub target_return: TargetReturn,
    pub normalization: bool,
    pub optimizer: AdamConfig,
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            n_updates: 5000,
            eval_interval: 1000,
            seed: 0,
            target_return: TargetReturn::BestInDataset,
            normalization: true,
            optimizer: AdamConfig::default(),
            max_grad_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("n_updates", self.n_updates),
            ("eval_interval", self.eval_interval),
        ] {
            if v == 0 {
                return Err(TrainerError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.eval_interval > self.n_updates {
            return Err(TrainerError::Invalid(format!(
                "eval_interval {} exceeds n_updates {}",
                self.eval_interval, self.n_updates
            )));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(TrainerError::Invalid(format!(
                "max_grad_norm must be positive, got {}",
                self.max_grad_norm
            )));
        }
        Ok(())
    }
}
