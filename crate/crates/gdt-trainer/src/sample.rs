use gdt_datasets::{Dataset, Episode};
use gdt_model::{StateNorm, TrajectoryWindow};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::TrainerError;

/// Draws `batch_size` training windows. Episodes are sampled with
/// probability proportional to their length (a transition is drawn
/// uniformly over the whole dataset), then the window ends at that
/// transition and is left-padded when fewer than K steps precede it.
pub fn sample_batch(
    ds: &Dataset,
    k: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    norm: &StateNorm,
) -> Result<Vec<TrajectoryWindow>, TrainerError> {
    let total = ds.n_transitions();
    if total == 0 {
        return Err(TrainerError::Invalid("empty dataset".into()));
    }
    if k == 0 || batch_size == 0 {
        return Err(TrainerError::Invalid(
            "context length and batch size must be positive".into(),
        ));
    }
    let mut bounds = Vec::with_capacity(ds.episodes.len());
    let mut cum = 0usize;
    for ep in &ds.episodes {
        cum += ep.len();
        bounds.push(cum);
    }
    let mut windows = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let g = rng.gen_range(0..total);
        let ep_idx = bounds.partition_point(|&b| b <= g);
        let ep = &ds.episodes[ep_idx];
        let end = g - (bounds[ep_idx] - ep.len());
        windows.push(window_at(ep, end, k, norm));
    }
    Ok(windows)
}

/// The K-step window of `ep` ending at transition `end` (inclusive),
/// left-padded with masked zero rows when the episode prefix is shorter.
pub fn window_at(ep: &Episode, end: usize, k: usize, norm: &StateNorm) -> TrajectoryWindow {
    let f = ep.transitions[0].flat_state.len();
    let a = ep.transitions[0].action.len();
    let start = (end + 1).saturating_sub(k);
    let real = end - start + 1;
    let pad = k - real;

    let mut w = TrajectoryWindow {
        returns_to_go: vec![0.0; k],
        states: vec![vec![0.0; f]; k],
        actions: vec![vec![0.0; a]; k],
        timesteps: vec![0; k],
        mask: vec![false; k],
    };
    for i in 0..real {
        let t = start + i;
        let slot = pad + i;
        w.returns_to_go[slot] = ep.returns_to_go[t];
        let mut state = ep.transitions[t].flat_state.clone();
        norm.apply(&mut state);
        w.states[slot] = state;
        w.actions[slot] = ep.transitions[t].action.clone();
        w.timesteps[slot] = t;
        w.mask[slot] = true;
    }
    w
}

/// Dataset stats as the model-side normalization, or the identity when
/// normalization is disabled.
pub fn state_norm(ds: &Dataset, enabled: bool) -> StateNorm {
    if enabled {
        StateNorm {
            mean: ds.manifest.normalization.mean.clone(),
            std: ds.manifest.normalization.std.clone(),
        }
    } else {
        StateNorm::identity(ds.flat_state_dim())
    }
}
