use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::DatasetError;
use crate::types::{Dataset, Episode, Normalization};

/// Combines complete episodes from the two sources so that expert
/// transitions land as close as possible to `expert_fraction * total`,
/// never more than one episode over, with ties resolved toward more
/// expert data. The random side then fills up to `total` at an episode
/// boundary. Episode order is shuffled by `seed`.
pub fn mix(
    expert_ds: &Dataset,
    random_ds: &Dataset,
    expert_fraction: f64,
    total_transitions: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    if !(0.0..=1.0).contains(&expert_fraction) {
        return Err(DatasetError::Invalid(format!(
            "expert_fraction must be in [0, 1], got {expert_fraction}"
        )));
    }
    if total_transitions == 0 {
        return Err(DatasetError::Invalid(
            "total_transitions must be at least 1".into(),
        ));
    }
    check_compatible(expert_ds, random_ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let expert_target = expert_fraction * total_transitions as f64;
    let (expert_picks, random_picks) = if expert_fraction >= 1.0 {
        // all-expert: the whole budget follows first-crossing semantics
        if expert_ds.n_transitions() < total_transitions {
            return Err(DatasetError::Insufficient {
                side: "expert",
                needed: total_transitions,
                available: expert_ds.n_transitions(),
            });
        }
        let picks = take_at_least(&expert_ds.episodes, total_transitions, &mut rng);
        (picks, Vec::new())
    } else {
        if (expert_ds.n_transitions() as f64) < expert_target.floor() {
            return Err(DatasetError::Insufficient {
                side: "expert",
                needed: expert_target.ceil() as usize,
                available: expert_ds.n_transitions(),
            });
        }
        let expert_picks = take_closest(&expert_ds.episodes, expert_target, &mut rng);
        let expert_count: usize = expert_picks.iter().map(|e| e.len()).sum();
        let random_needed = total_transitions.saturating_sub(expert_count);
        if random_ds.n_transitions() < random_needed {
            return Err(DatasetError::Insufficient {
                side: "random",
                needed: random_needed,
                available: random_ds.n_transitions(),
            });
        }
        let random_picks = take_at_least(&random_ds.episodes, random_needed, &mut rng);
        (expert_picks, random_picks)
    };

    let mut episodes: Vec<Episode> = expert_picks
        .into_iter()
        .chain(random_picks)
        .cloned()
        .collect();
    episodes.shuffle(&mut rng);
    Dataset::from_episodes(
        episodes,
        expert_ds.manifest.env_name.clone(),
        expert_ds.manifest.reward_mode,
        seed,
    )
}

/// Uniformly samples complete episodes until the budget is met at an
/// episode boundary.
pub fn subset(ds: &Dataset, n_transitions: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n_transitions == 0 {
        return Err(DatasetError::Invalid(
            "n_transitions must be at least 1".into(),
        ));
    }
    if n_transitions > ds.n_transitions() {
        return Err(DatasetError::Oversubscribed {
            requested: n_transitions,
            available: ds.n_transitions(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = take_at_least(&ds.episodes, n_transitions, &mut rng);
    Dataset::from_episodes(
        picks.into_iter().cloned().collect(),
        ds.manifest.env_name.clone(),
        ds.manifest.reward_mode,
        seed,
    )
}

/// Per-dimension population mean and standard deviation over all flat
/// states, with the standard deviation floored at 1e-6.
pub fn normalization_stats(ds: &Dataset) -> Result<Normalization, DatasetError> {
    if ds.n_transitions() < 2 {
        return Err(DatasetError::TooFewTransitions {
            needed: 2,
            available: ds.n_transitions(),
        });
    }
    stats_over(
        ds.episodes
            .iter()
            .flat_map(|e| e.transitions.iter().map(|t| t.flat_state.as_slice())),
    )
}

pub(crate) fn stats_over<'a>(
    rows: impl Iterator<Item = &'a [f64]> + Clone,
) -> Result<Normalization, DatasetError> {
    let mut rows_for_mean = rows.clone();
    let Some(first) = rows_for_mean.next() else {
        return Err(DatasetError::Empty);
    };
    let dim = first.len();
    let mut mean = first.to_vec();
    let mut count = 1usize;
    for row in rows_for_mean {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
        count += 1;
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0; dim];
    for row in rows {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
            let d = x - m;
            *v += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / count as f64).sqrt().max(1e-6))
        .collect();
    Ok(Normalization { mean, std })
}

fn check_compatible(a: &Dataset, b: &Dataset) -> Result<(), DatasetError> {
    if a.manifest.env_name != b.manifest.env_name {
        return Err(DatasetError::Incompatible(format!(
            "env {} vs {}",
            a.manifest.env_name, b.manifest.env_name
        )));
    }
    if a.manifest.reward_mode != b.manifest.reward_mode {
        return Err(DatasetError::Incompatible(format!(
            "reward mode {} vs {}",
            a.manifest.reward_mode.name(),
            b.manifest.reward_mode.name()
        )));
    }
    if a.flat_state_dim() != b.flat_state_dim() || a.action_dim() != b.action_dim() {
        return Err(DatasetError::Incompatible(
            "state or action dimensions differ".into(),
        ));
    }
    Ok(())
}

/// Takes shuffled episodes until the cumulative length is as close as
/// possible to `target`, ties toward taking one more.
fn take_closest<'a>(
    episodes: &'a [Episode],
    target: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a Episode> {
    let mut order: Vec<&Episode> = episodes.iter().collect();
    order.shuffle(rng);
    let mut taken = Vec::new();
    let mut cum = 0usize;
    for ep in order {
        if cum as f64 >= target {
            break;
        }
        let with = cum + ep.len();
        let under_gap = target - cum as f64;
        let over_gap = with as f64 - target;
        if over_gap > 0.0 && over_gap > under_gap {
            // stopping here is strictly closer than taking one more
            break;
        }
        taken.push(ep);
        cum = with;
    }
    taken
}

/// Takes shuffled episodes until the cumulative length reaches `target`
/// (first crossing, never stopping short while episodes remain).
fn take_at_least<'a>(
    episodes: &'a [Episode],
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a Episode> {
    let mut order: Vec<&Episode> = episodes.iter().collect();
    order.shuffle(rng);
    let mut taken = Vec::new();
    let mut cum = 0usize;
    for ep in order {
        if cum >= target {
            break;
        }
        cum += ep.len();
        taken.push(ep);
    }
    taken
}
