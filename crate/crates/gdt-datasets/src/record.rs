use gdt_envs::{flatten_state, GoalObservation, OraclePolicy, PointEnv};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::DatasetError;
use crate::types::{Dataset, Episode, PolicyTag, Transition};

/// A policy that can drive an environment during recording.
pub trait RolloutPolicy {
    fn act(&mut self, obs: &GoalObservation) -> Vec<f64>;
    fn tag(&self) -> PolicyTag;
    fn begin_episode(&mut self) {}
}

impl RolloutPolicy for OraclePolicy {
    fn act(&mut self, obs: &GoalObservation) -> Vec<f64> {
        OraclePolicy::act(self, obs)
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Expert
    }
}

/// The demonstrator with exploration noise folded into the recorded actions.
/// Each episode draws its own noise scale, so the dataset spans everything
/// from clean demonstrations to visibly perturbed ones. The perturbed
/// episodes matter: they visit states just off the nominal paths and record
/// how the demonstrator steers back, which is exactly the supervision a
/// cloned policy needs once its own small errors take it there.
pub struct ExpertPolicy {
    oracle: OraclePolicy,
    rng: ChaCha8Rng,
    max_noise: f64,
    episode_noise: f64,
}

impl ExpertPolicy {
    pub const DEFAULT_NOISE: f64 = 0.3;

    pub fn new(oracle: OraclePolicy, seed: u64, max_noise: f64) -> Self {
        Self {
            oracle,
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_noise,
            episode_noise: 0.0,
        }
    }

    pub fn for_env(env: &PointEnv, seed: u64) -> Self {
        Self::new(OraclePolicy::new(env.task()), seed, Self::DEFAULT_NOISE)
    }
}

impl RolloutPolicy for ExpertPolicy {
    fn act(&mut self, obs: &GoalObservation) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        self.oracle
            .act(obs)
            .into_iter()
            .map(|a| (a + self.episode_noise * normal.sample(&mut self.rng)).clamp(-1.0, 1.0))
            .collect()
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Expert
    }

    fn begin_episode(&mut self) {
        self.episode_noise = self.rng.gen_range(0.0..=self.max_noise);
    }
}

/// Uniform actions over [-1, 1] per coordinate.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    action_dim: usize,
}

impl RandomPolicy {
    pub fn new(action_dim: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            action_dim,
        }
    }

    pub fn for_env(env: &PointEnv, seed: u64) -> Self {
        Self::new(env.spec().action_dim, seed)
    }
}

impl RolloutPolicy for RandomPolicy {
    fn act(&mut self, _obs: &GoalObservation) -> Vec<f64> {
        (0..self.action_dim)
            .map(|_| self.rng.gen_range(-1.0..=1.0))
            .collect()
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Random
    }
}

/// Rolls complete episodes until at least `n_transitions` have been
/// collected, stopping at the episode boundary that crosses the budget.
pub fn record(
    env: &mut PointEnv,
    policy: &mut dyn RolloutPolicy,
    n_transitions: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    if n_transitions == 0 {
        return Err(DatasetError::Invalid(
            "n_transitions must be at least 1".into(),
        ));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::new();
    let mut collected = 0usize;
    while collected < n_transitions {
        let episode = roll_episode(env, policy, seeds.next_u64())?;
        collected += episode.len();
        episodes.push(episode);
    }
    Dataset::from_episodes(
        episodes,
        env.spec().name.clone(),
        env.spec().reward_mode,
        seed,
    )
}

fn roll_episode(
    env: &mut PointEnv,
    policy: &mut dyn RolloutPolicy,
    episode_seed: u64,
) -> Result<Episode, DatasetError> {
    let mut obs = env.reset(episode_seed);
    policy.begin_episode();
    let mut transitions = Vec::new();
    loop {
        let flat_state = flatten_state(&obs);
        let action = policy.act(&obs);
        let step = env
            .step(&action)
            .map_err(|e| DatasetError::Invalid(format!("environment rejected action: {e}")))?;
        transitions.push(Transition {
            flat_state,
            action,
            reward: step.reward,
            terminated: step.terminated,
            truncated: step.truncated,
        });
        if step.terminated || step.truncated {
            break;
        }
        obs = step.observation;
    }
    Episode::new(transitions, env.spec().name.clone(), policy.tag())
}
