//! Deterministic kinematic multi-goal environments: a 2D point agent
//! standing in for reach / push / pick-and-place tasks, with the
//! dictionary observation contract (observation, desired goal, achieved
//! goal) and sparse or dense rewards.

mod env;
mod oracle;

pub use env::{
    compute_reward, flatten_state, EnvError, EnvSpec, GoalObservation, PointEnv, RewardMode,
    StepResult, TaskKind, CONTACT_RADIUS, GRASP_RADIUS, V_MAX,
};
pub use oracle::OraclePolicy;
