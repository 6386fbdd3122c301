use gdt_datasets::{record, RolloutPolicy};
use gdt_envs::{flatten_state, OraclePolicy, PointEnv, RewardMode, TaskKind};
use gdt_model::{DTConfig, DTModel, TrajectoryWindow};
use gdt_tensor::{AdamConfig, Tape64};
use gdt_trainer::{state_norm, train, window_at, TargetReturn, TrainConfig};
use std::time::Instant;

struct OracleRollout(OraclePolicy);
impl RolloutPolicy for OracleRollout {
    fn act(&mut self, obs: &gdt_envs::GoalObservation) -> Vec<f64> {
        self.0.act(obs)
    }
    fn tag(&self) -> gdt_datasets::PolicyTag {
        gdt_datasets::PolicyTag::Expert
    }
}

fn main() {
    let task = TaskKind::Push;
    let mode = RewardMode::Dense;
    let mut env = PointEnv::new(task, mode);
    let mut policy = OracleRollout(OraclePolicy::new(task));
    let ds = record(&mut env, &mut policy, 50_000, 1).expect("record");
    let norm = state_norm(&ds, true);

    // 1-NN regression error on held-out episodes: how learnable is
    // state -> action from this data, ignoring architecture entirely?
    let held = record(&mut env, &mut policy, 2_000, 999).expect("held");
    let train_pool: Vec<(&Vec<f64>, &Vec<f64>)> = ds
        .episodes
        .iter()
        .take(300)
        .flat_map(|e| e.transitions.iter().map(|t| (&t.flat_state, &t.action)))
        .collect();
    let mut nn_se = 0.0;
    let mut nn_n = 0;
    for e in held.episodes.iter().take(20) {
        for (s, a) in e.transitions.iter().map(|t| (&t.flat_state, &t.action)) {
            let mut best = f64::INFINITY;
            let mut best_a: &Vec<f64> = a;
            for (ts, ta) in &train_pool {
                let d: f64 = s.iter().zip(ts.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                if d < best {
                    best = d;
                    best_a = ta;
                }
            }
            nn_se += a
                .iter()
                .zip(best_a.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
            nn_n += a.len();
        }
    }
    println!("1-NN held-out action MSE: {:.6}", nn_se / nn_n as f64);

    let spec = env.spec();
    let cfg = DTConfig {
        context_length: 8,
        embed_dim: 32,
        n_layers: 2,
        n_heads: 2,
        dropout: 0.0,
        ..DTConfig::defaults(
            spec.state_dim,
            spec.action_dim,
            spec.goal_dim,
            spec.episode_horizon,
        )
    };
    let mut model = DTModel::new(cfg, 0).expect("model");
    let tcfg = TrainConfig {
        batch_size: 32,
        n_updates: 1500,
        eval_interval: 1500,
        seed: 0,
        target_return: TargetReturn::BestInDataset,
        normalization: true,
        optimizer: AdamConfig {
            lr: 1e-3,
            warmup_steps: 100,
            ..AdamConfig::default()
        },
        max_grad_norm: 1.0,
    };
    let t = Instant::now();
    let out = train(&mut model, &ds, &tcfg, None).expect("train");
    println!(
        "train: final loss {:.6} ({:?})",
        out.losses.last().unwrap().1,
        t.elapsed()
    );

    // Teacher forcing on held-out episodes: context comes from the expert's
    // own history, so compounding error is impossible. Also measures the
    // same thing on training episodes to expose train/eval drift.
    for (name, pool) in [("train", &ds.episodes[..20]), ("held", &held.episodes[..])] {
        let mut se = 0.0;
        let mut n = 0;
        for ep in pool.iter().take(20) {
            let k = 8;
            for t in 0..ep.len() {
                let w = window_at(ep, t, k, &norm);
                let mut tape = Tape64::new();
                let pred = model.forward(&mut tape, &w).expect("fwd");
                let row = &tape.value(pred).data()[(k - 1) * 2..k * 2];
                se += row
                    .iter()
                    .zip(ep.transitions[t].action.iter())
                    .map(|(p, a)| (p - a) * (p - a))
                    .sum::<f64>();
                n += 2;
            }
        }
        println!("teacher-forced {name} MSE: {:.6}", se / n as f64);
    }

    // Where does a rollout actually go wrong? Roll one episode greedily and
    // print the divergence from what the oracle would have done.
    let mut env = PointEnv::new(task, mode);
    let obs0 = env.reset(424242);
    let oracle = OraclePolicy::new(task);
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_a: Vec<Vec<f64>> = Vec::new();
    let mut hist_r: Vec<f64> = Vec::new();
    let mut hist_t: Vec<usize> = Vec::new();
    let mut obs = obs0;
    let mut cum = 0.0;
    let target = out.target_return;
    for t in 0..150 {
        let mut s = flatten_state(&obs);
        norm.apply(&mut s);
        hist_s.push(s);
        hist_a.push(vec![0.0, 0.0]);
        hist_r.push(target - cum);
        hist_t.push(t);
        let k = 8;
        let len = hist_s.len();
        let real = len.min(k);
        let start = len - real;
        let pad = k - real;
        let mut w = TrajectoryWindow {
            returns_to_go: vec![0.0; k],
            states: vec![vec![0.0; cfg_flat(&model)]; k],
            actions: vec![vec![0.0; 2]; k],
            timesteps: vec![0; k],
            mask: vec![false; k],
        };
        for i in 0..real {
            let (slot, src) = (pad + i, start + i);
            w.returns_to_go[slot] = hist_r[src];
            w.states[slot] = hist_s[src].clone();
            w.actions[slot] = hist_a[src].clone();
            w.timesteps[slot] = hist_t[src];
            w.mask[slot] = true;
        }
        let mut tape = Tape64::new();
        let pred = model.forward(&mut tape, &w).expect("fwd");
        let act = tape.value(pred).data()[(k - 1) * 2..k * 2].to_vec();
        let oracle_act = oracle.act(&obs);
        if t % 10 == 0 {
            println!(
                "t={t:3} agent=({:+.3},{:+.3}) obj=({:+.3},{:+.3}) act=({:+.2},{:+.2}) oracle=({:+.2},{:+.2})",
                obs.observation[0],
                obs.observation[1],
                obs.observation[2],
                obs.observation[3],
                act[0],
                act[1],
                oracle_act[0],
                oracle_act[1]
            );
        }
        *hist_a.last_mut().unwrap() = act.clone();
        let sr = env.step(&act).expect("step");
        cum += sr.reward;
        if sr.terminated || sr.truncated {
            println!("episode end at t={t}, terminated={} return={:.3}", sr.terminated, cum);
            break;
        }
        obs = sr.observation;
    }
}

fn cfg_flat(m: &DTModel) -> usize {
    m.config().flat_state_dim()
}
