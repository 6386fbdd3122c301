use gdt_envs::RewardMode;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyTag {
    Expert,
    Random,
}

impl PolicyTag {
    pub fn name(self) -> &'static str {
        match self {
            PolicyTag::Expert => "expert",
            PolicyTag::Random => "random",
        }
    }
}

/// One environment step: the flat state the action was taken from, the
/// action, the reward it earned, and how the episode stood afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub flat_state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub returns_to_go: Vec<f64>,
    pub success: bool,
    pub env_name: String,
    pub policy_tag: PolicyTag,
}

impl Episode {
    /// Builds an episode from raw transitions, computing returns-to-go as
    /// exact suffix sums of the rewards.
    pub fn new(
        transitions: Vec<Transition>,
        env_name: String,
        policy_tag: PolicyTag,
    ) -> Result<Self, DatasetError> {
        let Some(last) = transitions.last() else {
            return Err(DatasetError::Invalid("episode with no transitions".into()));
        };
        if !last.terminated && !last.truncated {
            return Err(DatasetError::Invalid(
                "episode does not end in terminated or truncated".into(),
            ));
        }
        let success = last.terminated;
        let returns_to_go = suffix_sums(transitions.iter().map(|t| t.reward));
        Ok(Self {
            transitions,
            returns_to_go,
            success,
            env_name,
            policy_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Total undiscounted return, the first return-to-go entry.
    pub fn total_return(&self) -> f64 {
        self.returns_to_go[0]
    }
}

pub(crate) fn suffix_sums(rewards: impl DoubleEndedIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = rewards.rev().collect();
    let mut acc = 0.0;
    for r in out.iter_mut() {
        acc += *r;
        *r = acc;
    }
    out.reverse();
    out
}

/// Per-dimension population statistics of the flat states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub env_name: String,
    pub reward_mode: RewardMode,
    pub n_episodes: usize,
    pub n_transitions: usize,
    pub expert_fraction: f64,
    pub seed: u64,
    pub normalization: Normalization,
    pub best_return: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    /// Assembles a dataset, deriving every manifest count and statistic
    /// from the episodes themselves.
    pub fn from_episodes(
        episodes: Vec<Episode>,
        env_name: String,
        reward_mode: RewardMode,
        seed: u64,
    ) -> Result<Self, DatasetError> {
        if episodes.is_empty() {
            return Err(DatasetError::Empty);
        }
        let n_transitions: usize = episodes.iter().map(Episode::len).sum();
        let expert_transitions: usize = episodes
            .iter()
            .filter(|e| e.policy_tag == PolicyTag::Expert)
            .map(Episode::len)
            .sum();
        let normalization = crate::ops::stats_over(
            episodes
                .iter()
                .flat_map(|e| e.transitions.iter().map(|t| t.flat_state.as_slice())),
        )?;
        let best_return = episodes
            .iter()
            .map(Episode::total_return)
            .fold(f64::NEG_INFINITY, f64::max);
        let manifest = DatasetManifest {
            env_name,
            reward_mode,
            n_episodes: episodes.len(),
            n_transitions,
            expert_fraction: expert_transitions as f64 / n_transitions as f64,
            seed,
            normalization,
            best_return,
        };
        Ok(Self { manifest, episodes })
    }

    pub fn n_transitions(&self) -> usize {
        self.manifest.n_transitions
    }

    pub fn success_rate(&self) -> f64 {
        let hits = self.episodes.iter().filter(|e| e.success).count();
        hits as f64 / self.episodes.len() as f64
    }

    pub fn flat_state_dim(&self) -> usize {
        self.episodes[0].transitions[0].flat_state.len()
    }

    pub fn action_dim(&self) -> usize {
        self.episodes[0].transitions[0].action.len()
    }
}
