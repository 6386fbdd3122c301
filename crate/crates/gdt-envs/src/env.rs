use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const V_MAX: f64 = 0.05;
pub const CONTACT_RADIUS: f64 = 0.05;
pub const GRASP_RADIUS: f64 = 0.05;

const DEFAULT_EPSILON: f64 = 0.05;
const WORKSPACE_LOW: [f64; 2] = [-1.0, -1.0];
const WORKSPACE_HIGH: [f64; 2] = [1.0, 1.0];

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown environment {0:?}; expected point-reach, point-push, or point-pickplace")]
    UnknownEnv(String),
    #[error("episode is over (terminated or truncated); call reset before stepping")]
    NeedsReset,
    #[error("action has {got} coordinates, environment expects {expected}")]
    ActionLength { got: usize, expected: usize },
    #[error("action contains a non-finite coordinate")]
    NonFiniteAction,
    #[error("achieved goal has length {achieved}, desired goal {desired}")]
    GoalLengthMismatch { achieved: usize, desired: usize },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Sparse,
    Dense,
}

impl RewardMode {
    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Sparse => "sparse",
            RewardMode::Dense => "dense",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sparse" => Some(RewardMode::Sparse),
            "dense" => Some(RewardMode::Dense),
            _ => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Reach,
    Push,
    PickPlace,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Reach => "point-reach",
            TaskKind::Push => "point-push",
            TaskKind::PickPlace => "point-pickplace",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, EnvError> {
        match name {
            "point-reach" => Ok(TaskKind::Reach),
            "point-push" => Ok(TaskKind::Push),
            "point-pickplace" => Ok(TaskKind::PickPlace),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }

    pub const ALL: [TaskKind; 3] = [TaskKind::Reach, TaskKind::Push, TaskKind::PickPlace];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    pub episode_horizon: usize,
    pub success_epsilon: f64,
    pub reward_mode: RewardMode,
    pub workspace_low: [f64; 2],
    pub workspace_high: [f64; 2],
}

impl EnvSpec {
    /// Flat-state length: observation plus both goal vectors.
    pub fn flat_state_dim(&self) -> usize {
        self.state_dim + 2 * self.goal_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalObservation {
    pub observation: Vec<f64>,
    pub desired_goal: Vec<f64>,
    pub achieved_goal: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: GoalObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Sparse: 0 within `success_epsilon` of the goal (boundary inclusive),
/// −1 otherwise. Dense: negative Euclidean distance.
pub fn compute_reward(
    achieved: &[f64],
    desired: &[f64],
    mode: RewardMode,
    success_epsilon: f64,
) -> Result<f64, EnvError> {
    if achieved.len() != desired.len() {
        return Err(EnvError::GoalLengthMismatch {
            achieved: achieved.len(),
            desired: desired.len(),
        });
    }
    let dist = achieved
        .iter()
        .zip(desired)
        .map(|(a, d)| (a - d) * (a - d))
        .sum::<f64>()
        .sqrt();
    Ok(match mode {
        RewardMode::Sparse => {
            if dist <= success_epsilon {
                0.0
            } else {
                -1.0
            }
        }
        RewardMode::Dense => -dist,
    })
}

/// Eq-style flattening: [observation | desired_goal | achieved_goal].
pub fn flatten_state(obs: &GoalObservation) -> Vec<f64> {
    let mut out =
        Vec::with_capacity(obs.observation.len() + obs.desired_goal.len() + obs.achieved_goal.len());
    out.extend_from_slice(&obs.observation);
    out.extend_from_slice(&obs.desired_goal);
    out.extend_from_slice(&obs.achieved_goal);
    out
}

pub struct PointEnv {
    spec: EnvSpec,
    task: TaskKind,
    rng: ChaCha8Rng,
    agent: [f64; 2],
    object: [f64; 2],
    carry_offset: Option<[f64; 2]>,
    goal: [f64; 2],
    steps: usize,
    live: bool,
}

impl PointEnv {
    pub fn new(task: TaskKind, reward_mode: RewardMode) -> Self {
        let (state_dim, action_dim, horizon) = match task {
            TaskKind::Reach => (2, 2, 50),
            // push / pick-and-place paths run agent→object→goal, so the
            // 50-step budget that suits reach is far too small here
            TaskKind::Push => (4, 2, 150),
            TaskKind::PickPlace => (5, 3, 150),
        };
        let spec = EnvSpec {
            name: task.name().to_string(),
            state_dim,
            goal_dim: 2,
            action_dim,
            episode_horizon: horizon,
            success_epsilon: DEFAULT_EPSILON,
            reward_mode,
            workspace_low: WORKSPACE_LOW,
            workspace_high: WORKSPACE_HIGH,
        };
        Self {
            spec,
            task,
            rng: ChaCha8Rng::seed_from_u64(0),
            agent: [0.0; 2],
            object: [0.0; 2],
            carry_offset: None,
            goal: [0.0; 2],
            steps: 0,
            live: false,
        }
    }

    pub fn from_name(name: &str, reward_mode: RewardMode) -> Result<Self, EnvError> {
        Ok(Self::new(TaskKind::from_name(name)?, reward_mode))
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn reset(&mut self, seed: u64) -> GoalObservation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.agent = self.sample_point();
        self.object = match self.task {
            TaskKind::Reach => [0.0; 2],
            _ => self.sample_point(),
        };
        self.carry_offset = None;
        let achieved = self.achieved();
        // keep the goal off the initial achieved position so no episode
        // starts solved
        loop {
            let goal = self.sample_point();
            if dist2(&goal, &achieved) >= 2.0 * self.spec.success_epsilon {
                self.goal = goal;
                break;
            }
        }
        self.steps = 0;
        self.live = true;
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.live {
            return Err(EnvError::NeedsReset);
        }
        if action.len() != self.spec.action_dim {
            return Err(EnvError::ActionLength {
                got: action.len(),
                expected: self.spec.action_dim,
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);
        let old = self.agent;
        let new = self.clamp_point([old[0] + ax * V_MAX, old[1] + ay * V_MAX]);
        let delta = [new[0] - old[0], new[1] - old[1]];
        match self.task {
            TaskKind::Reach => {}
            TaskKind::Push => {
                let to_obj = [self.object[0] - old[0], self.object[1] - old[1]];
                let overlap = dist2(&old, &self.object) <= CONTACT_RADIUS;
                let toward = delta[0] * to_obj[0] + delta[1] * to_obj[1] > 0.0;
                if overlap && toward {
                    self.object = self.clamp_point([
                        self.object[0] + delta[0],
                        self.object[1] + delta[1],
                    ]);
                }
            }
            TaskKind::PickPlace => {
                let grip = action[2].clamp(-1.0, 1.0);
                if grip >= 0.0 {
                    self.carry_offset = None;
                } else if self.carry_offset.is_none() && dist2(&new, &self.object) <= GRASP_RADIUS
                {
                    self.carry_offset =
                        Some([self.object[0] - new[0], self.object[1] - new[1]]);
                }
                if let Some(offset) = self.carry_offset {
                    self.object =
                        self.clamp_point([new[0] + offset[0], new[1] + offset[1]]);
                    // workspace clamping can shrink the ride offset
                    self.carry_offset =
                        Some([self.object[0] - new[0], self.object[1] - new[1]]);
                }
            }
        }
        self.agent = new;
        self.steps += 1;
        let achieved = self.achieved();
        let reward = compute_reward(
            &achieved,
            &self.goal,
            self.spec.reward_mode,
            self.spec.success_epsilon,
        )
        .expect("goal dimensions are fixed per task");
        let terminated = dist2(&achieved, &self.goal) <= self.spec.success_epsilon;
        let truncated = !terminated && self.steps >= self.spec.episode_horizon;
        if terminated || truncated {
            self.live = false;
        }
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated,
            truncated,
        })
    }

    /// Diagnostic hook: pin the simulator state directly. Used by tests
    /// that need exact geometry instead of seed hunting.
    #[doc(hidden)]
    pub fn force_state(&mut self, agent: [f64; 2], object: [f64; 2], goal: [f64; 2]) {
        self.agent = self.clamp_point(agent);
        self.object = self.clamp_point(object);
        self.goal = self.clamp_point(goal);
        self.carry_offset = None;
        self.steps = 0;
        self.live = true;
    }

    fn observe(&self) -> GoalObservation {
        let observation = match self.task {
            TaskKind::Reach => self.agent.to_vec(),
            TaskKind::Push => vec![self.agent[0], self.agent[1], self.object[0], self.object[1]],
            TaskKind::PickPlace => vec![
                self.agent[0],
                self.agent[1],
                self.object[0],
                self.object[1],
                if self.carry_offset.is_some() { 1.0 } else { 0.0 },
            ],
        };
        GoalObservation {
            observation,
            desired_goal: self.goal.to_vec(),
            achieved_goal: self.achieved(),
        }
    }

    fn achieved(&self) -> Vec<f64> {
        match self.task {
            TaskKind::Reach => self.agent.to_vec(),
            TaskKind::Push | TaskKind::PickPlace => self.object.to_vec(),
        }
    }

    fn sample_point(&mut self) -> [f64; 2] {
        let lo = self.spec.workspace_low;
        let hi = self.spec.workspace_high;
        [
            self.rng.gen_range(lo[0]..=hi[0]),
            self.rng.gen_range(lo[1]..=hi[1]),
        ]
    }

    fn clamp_point(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.spec.workspace_low[0], self.spec.workspace_high[0]),
            p[1].clamp(self.spec.workspace_low[1], self.spec.workspace_high[1]),
        ]
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
