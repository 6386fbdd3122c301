use gdt_datasets::Dataset;
use gdt_envs::PointEnv;
use gdt_model::{action_loss, action_targets, DTModel, ForwardMode, StateNorm};
use gdt_tensor::{clip_global_norm, Adam, Tape64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{TargetReturn, TrainConfig};
use crate::error::TrainerError;
use crate::sample::{sample_batch, state_norm};

pub struct TrainOutcome {
    /// (update index, loss) pairs recorded at update 0, every 100 updates,
    /// and at the final update.
    pub losses: Vec<(usize, f64)>,
    /// Normalization applied to states during training; save it with the
    /// model so evaluation preprocesses identically.
    pub normalization: StateNorm,
    /// Return-to-go the evaluator should condition on.
    pub target_return: f64,
}

/// Runs `n_updates` of sample → forward → loss → backward → clipped Adam
/// step. Deterministic under `cfg.seed`. `progress` is invoked at every
/// recorded loss point.
pub fn train(
    model: &mut DTModel,
    ds: &Dataset,
    cfg: &TrainConfig,
    mut progress: Option<&mut dyn FnMut(usize, f64)>,
) -> Result<TrainOutcome, TrainerError> {
    cfg.validate()?;
    check_dims(model, ds)?;
    if ds.n_transitions() == 0 {
        return Err(TrainerError::Invalid("empty dataset".into()));
    }

    let norm = state_norm(ds, cfg.normalization);
    let k = model.config().context_length;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes: Vec<usize> = model.named_params().map(|(_, t)| t.numel()).collect();
    let mut opt = Adam::new(cfg.optimizer, &sizes);

    let mut losses = Vec::new();
    for update in 0..cfg.n_updates {
        let windows = sample_batch(ds, k, cfg.batch_size, &mut rng, &norm)?;
        let mut tape = Tape64::new();
        let out = model.forward_batch(&mut tape, &windows, ForwardMode::Train { rng: &mut rng })?;
        let (targets, mask) = action_targets(&windows);
        let loss = action_loss(&mut tape, out.predictions, &targets, &mask)?;
        let loss_value = tape.value(loss).data()[0];
        if !loss_value.is_finite() {
            return Err(TrainerError::NanLoss { update });
        }
        tape.backward(loss)?;
        let mut grads: Vec<Vec<f64>> = out
            .params
            .iter()
            .map(|&id| tape.grad(id).expect("trainable leaf").to_vec())
            .collect();
        clip_global_norm(&mut grads, cfg.max_grad_norm);
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        opt.step(model.tensors_mut(), &grad_refs)?;

        if update % 100 == 0 || update == cfg.n_updates - 1 {
            if !model.all_finite() {
                return Err(TrainerError::NanLoss { update });
            }
            losses.push((update, loss_value));
            if let Some(cb) = progress.as_deref_mut() {
                cb(update, loss_value);
            }
        }
    }

    let target_return = match cfg.target_return {
        TargetReturn::Fixed(r) => r,
        TargetReturn::BestInDataset => ds.manifest.best_return,
    };
    Ok(TrainOutcome {
        losses,
        normalization: norm,
        target_return,
    })
}

fn check_dims(model: &DTModel, ds: &Dataset) -> Result<(), TrainerError> {
    let env = PointEnv::from_name(&ds.manifest.env_name, ds.manifest.reward_mode)?;
    let spec = env.spec();
    let cfg = model.config();
    if cfg.flat_state_dim() != spec.flat_state_dim() || cfg.action_dim != spec.action_dim {
        return Err(TrainerError::Incompatible(format!(
            "model expects {} state dims and {} action dims, {} provides {} and {}",
            cfg.flat_state_dim(),
            cfg.action_dim,
            spec.name,
            spec.flat_state_dim(),
            spec.action_dim
        )));
    }
    if cfg.max_timestep < spec.episode_horizon {
        return Err(TrainerError::Incompatible(format!(
            "model max_timestep {} is below the {} episode horizon {}",
            cfg.max_timestep, spec.name, spec.episode_horizon
        )));
    }
    Ok(())
}
