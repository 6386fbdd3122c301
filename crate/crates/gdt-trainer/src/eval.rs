use gdt_envs::{flatten_state, GoalObservation, OraclePolicy, PointEnv, RewardMode, TaskKind};
use gdt_model::{DTModel, StateNorm, TrajectoryWindow};
use gdt_tensor::Tape64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::thread;

use crate::error::TrainerError;

/// A policy under evaluation. Cloned once per seed worker; `begin_episode`
/// resets any in-episode context the agent keeps.
pub trait Agent: Clone + Send + Sync {
    fn begin_episode(&mut self);
    fn act(
        &mut self,
        obs: &GoalObservation,
        rtg: f64,
        timestep: usize,
    ) -> Result<Vec<f64>, TrainerError>;
}

/// Decision Transformer policy: keeps the episode history and feeds the model
/// the last `context_length` timesteps, left-padded, with the current action
/// slot zeroed (the model never sees the action it is about to produce).
#[derive(Clone)]
pub struct DTAgent<'m> {
    model: &'m DTModel,
    norm: StateNorm,
    rtgs: Vec<f64>,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    timesteps: Vec<usize>,
}

impl<'m> DTAgent<'m> {
    pub fn new(model: &'m DTModel, norm: StateNorm) -> Self {
        Self {
            model,
            norm,
            rtgs: Vec::new(),
            states: Vec::new(),
            actions: Vec::new(),
            timesteps: Vec::new(),
        }
    }
}

impl Agent for DTAgent<'_> {
    fn begin_episode(&mut self) {
        self.rtgs.clear();
        self.states.clear();
        self.actions.clear();
        self.timesteps.clear();
    }

    fn act(
        &mut self,
        obs: &GoalObservation,
        rtg: f64,
        timestep: usize,
    ) -> Result<Vec<f64>, TrainerError> {
        let cfg = self.model.config();
        let (k, f, a) = (cfg.context_length, cfg.flat_state_dim(), cfg.action_dim);

        let mut state = flatten_state(obs);
        self.norm.apply(&mut state);
        self.rtgs.push(rtg);
        self.states.push(state);
        self.actions.push(vec![0.0; a]);
        self.timesteps.push(timestep);

        let len = self.states.len();
        let real = len.min(k);
        let start = len - real;
        let pad = k - real;

        let mut window = TrajectoryWindow {
            returns_to_go: vec![0.0; k],
            states: vec![vec![0.0; f]; k],
            actions: vec![vec![0.0; a]; k],
            timesteps: vec![0; k],
            mask: vec![false; k],
        };
        for i in 0..real {
            let slot = pad + i;
            let src = start + i;
            window.returns_to_go[slot] = self.rtgs[src];
            window.states[slot] = self.states[src].clone();
            window.actions[slot] = self.actions[src].clone();
            window.timesteps[slot] = self.timesteps[src];
            window.mask[slot] = true;
        }

        let mut tape = Tape64::new();
        let pred = self.model.forward(&mut tape, &window)?;
        let out = tape.value(pred);
        let action = out.data()[(k - 1) * a..k * a].to_vec();
        *self.actions.last_mut().unwrap() = action.clone();
        Ok(action)
    }
}

/// The scripted demonstrator run through the evaluation harness. Useful as a
/// ceiling and as a harness self-check.
#[derive(Clone)]
pub struct OracleAgent {
    task: TaskKind,
}

impl OracleAgent {
    pub fn new(task: TaskKind) -> Self {
        Self { task }
    }
}

impl Agent for OracleAgent {
    fn begin_episode(&mut self) {}

    fn act(
        &mut self,
        obs: &GoalObservation,
        _rtg: f64,
        _timestep: usize,
    ) -> Result<Vec<f64>, TrainerError> {
        Ok(OraclePolicy::new(self.task).act(obs))
    }
}

/// Uniform random actions in [-1, 1]^action_dim; the floor baseline.
#[derive(Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
    action_dim: usize,
}

impl RandomAgent {
    pub fn new(action_dim: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            action_dim,
        }
    }
}

impl Agent for RandomAgent {
    fn begin_episode(&mut self) {}

    fn act(
        &mut self,
        _obs: &GoalObservation,
        _rtg: f64,
        _timestep: usize,
    ) -> Result<Vec<f64>, TrainerError> {
        Ok((0..self.action_dim)
            .map(|_| self.rng.gen_range(-1.0..=1.0))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedEval {
    pub seed: u64,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub timesteps: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub env_name: String,
    pub reward_mode: RewardMode,
    pub target_return: f64,
    pub budget_per_seed: usize,
    pub timesteps: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub return_std: f64,
    pub success_std: f64,
    pub per_seed: Vec<SeedEval>,
}

fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("GDT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    thread::available_parallelism().map_or(1, |n| n.get())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn eval_seed<A: Agent>(
    proto: &A,
    task: TaskKind,
    mode: RewardMode,
    target_return: f64,
    budget: usize,
    seed: u64,
) -> Result<SeedEval, TrainerError> {
    let mut env = PointEnv::new(task, mode);
    let mut agent = proto.clone();
    let mut episode_seeds = ChaCha8Rng::seed_from_u64(seed);

    let mut steps = 0usize;
    let mut episodes = 0usize;
    let mut successes = 0usize;
    let mut returns = Vec::new();

    while steps < budget {
        let mut obs = env.reset(episode_seeds.next_u64());
        agent.begin_episode();
        let mut cum_reward = 0.0;
        let mut t = 0usize;
        loop {
            let action = agent.act(&obs, target_return - cum_reward, t)?;
            let step = env.step(&action)?;
            steps += 1;
            t += 1;
            cum_reward += step.reward;
            if step.terminated || step.truncated {
                episodes += 1;
                if step.terminated {
                    successes += 1;
                }
                returns.push(cum_reward);
                break;
            }
            obs = step.observation;
        }
    }

    Ok(SeedEval {
        seed,
        episodes,
        successes,
        success_rate: 100.0 * successes as f64 / episodes as f64,
        mean_return: mean(&returns),
        timesteps: steps,
    })
}

/// Roll complete episodes per seed until at least `budget_per_seed` env steps
/// have elapsed. Seeds run in parallel, capped by GDT_THREADS (or the machine
/// parallelism); episode streams are derived per seed, so the report is
/// independent of the worker schedule.
pub fn evaluate<A: Agent>(
    proto: &A,
    task: TaskKind,
    mode: RewardMode,
    target_return: f64,
    budget_per_seed: usize,
    seeds: &[u64],
) -> Result<EvalReport, TrainerError> {
    if seeds.is_empty() {
        return Err(TrainerError::Invalid("evaluate needs at least one seed".into()));
    }
    if budget_per_seed == 0 {
        return Err(TrainerError::Invalid(
            "evaluation timestep budget must be positive".into(),
        ));
    }

    let n = seeds.len();
    let workers = thread_cap().min(n).max(1);
    let chunk = n.div_ceil(workers);
    let mut slots: Vec<Option<Result<SeedEval, TrainerError>>> = Vec::new();
    slots.resize_with(n, || None);

    thread::scope(|scope| {
        for (seed_chunk, out_chunk) in seeds.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (&seed, slot) in seed_chunk.iter().zip(out_chunk.iter_mut()) {
                    *slot = Some(eval_seed(proto, task, mode, target_return, budget_per_seed, seed));
                }
            });
        }
    });

    let per_seed = slots
        .into_iter()
        .map(|s| s.expect("worker filled every slot"))
        .collect::<Result<Vec<_>, _>>()?;

    let episodes: usize = per_seed.iter().map(|s| s.episodes).sum();
    let successes: usize = per_seed.iter().map(|s| s.successes).sum();
    let timesteps: usize = per_seed.iter().map(|s| s.timesteps).sum();
    let rates: Vec<f64> = per_seed.iter().map(|s| s.success_rate).collect();
    let rets: Vec<f64> = per_seed.iter().map(|s| s.mean_return).collect();

    Ok(EvalReport {
        env_name: PointEnv::new(task, mode).spec().name.clone(),
        reward_mode: mode,
        target_return,
        budget_per_seed,
        timesteps,
        episodes,
        successes,
        success_rate: 100.0 * successes as f64 / episodes as f64,
        mean_return: mean(&rets),
        return_std: population_std(&rets),
        success_std: population_std(&rates),
        per_seed,
    })
}
