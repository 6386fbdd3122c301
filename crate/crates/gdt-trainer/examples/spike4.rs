use gdt_datasets::{record, ExpertPolicy, RolloutPolicy};
use gdt_envs::{flatten_state, OraclePolicy, PointEnv, RewardMode, TaskKind};
use gdt_model::{DTConfig, DTModel, TrajectoryWindow};
use gdt_tensor::{AdamConfig, Tape64};
use gdt_trainer::{state_norm, train, window_at, TargetReturn, TrainConfig};

struct OracleRollout(OraclePolicy);
impl RolloutPolicy for OracleRollout {
    fn act(&mut self, obs: &gdt_envs::GoalObservation) -> Vec<f64> {
        self.0.act(obs)
    }
    fn tag(&self) -> gdt_datasets::PolicyTag {
        gdt_datasets::PolicyTag::Expert
    }
}

fn build_window(
    k: usize,
    sdim: usize,
    adim: usize,
    hist_s: &[Vec<f64>],
    hist_a: &[Vec<f64>],
    hist_r: &[f64],
    hist_t: &[usize],
) -> TrajectoryWindow {
    let len = hist_s.len();
    let real = len.min(k);
    let pad = k - real;
    let mut w = TrajectoryWindow {
        returns_to_go: vec![0.0; k],
        states: vec![vec![0.0; sdim]; k],
        actions: vec![vec![0.0; adim]; k],
        timesteps: vec![0; k],
        mask: vec![false; k],
    };
    for i in 0..real {
        let slot = pad + i;
        let src = len - real + i;
        w.returns_to_go[slot] = hist_r[src];
        w.states[slot] = hist_s[src].clone();
        w.actions[slot] = hist_a[src].clone();
        w.timesteps[slot] = hist_t[src];
        w.mask[slot] = true;
    }
    w
}

fn main() {
    let task = TaskKind::Push;
    let mode = RewardMode::Dense;
    let mut env = PointEnv::new(task, mode);
    let mut policy = ExpertPolicy::for_env(&env, 7);
    let ds = record(&mut env, &mut policy, 50_000, 1).expect("record");
    let norm = state_norm(&ds, true);

    let spec = env.spec();
    let k = 8;
    let cfg = DTConfig {
        context_length: k,
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
    train(&mut model, &ds, &tcfg, None).expect("train");

    // Replay a recorded expert episode through the eval-style incremental
    // window builder and through window_at; predictions must agree exactly.
    let ep = &ds.episodes[7];
    let target = ep.total_return();
    let sdim = ep.transitions[0].flat_state.len();
    let adim = ep.transitions[0].action.len();
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_a: Vec<Vec<f64>> = Vec::new();
    let mut hist_r: Vec<f64> = Vec::new();
    let mut hist_t: Vec<usize> = Vec::new();
    let mut cum = 0.0;
    let mut max_gap = 0.0f64;
    let mut tf_se = 0.0;
    let mut tf_n = 0;
    for t in 0..ep.len() {
        let mut s = ep.transitions[t].flat_state.clone();
        norm.apply(&mut s);
        hist_s.push(s);
        hist_a.push(vec![0.0; adim]);
        hist_r.push(target - cum);
        hist_t.push(t);

        let w = build_window(k, sdim, adim, &hist_s, &hist_a, &hist_r, &hist_t);
        let mut tape = Tape64::new();
        let pred = model.forward(&mut tape, &w).expect("fwd");
        let eval_row: Vec<f64> = tape.value(pred).data()[(k - 1) * adim..k * adim].to_vec();

        let w2 = window_at(ep, t, k, &norm);
        let mut tape2 = Tape64::new();
        let pred2 = model.forward(&mut tape2, &w2).expect("fwd");
        let train_row = &tape2.value(pred2).data()[(k - 1) * adim..k * adim];

        for (a, b) in eval_row.iter().zip(train_row.iter()) {
            max_gap = max_gap.max((a - b).abs());
        }
        for (p, a) in eval_row.iter().zip(ep.transitions[t].action.iter()) {
            tf_se += (p - a) * (p - a);
            tf_n += 1;
        }

        // commit what actually happened
        let last = hist_a.last_mut().unwrap();
        last.copy_from_slice(&ep.transitions[t].action);
        cum += ep.transitions[t].reward;
    }
    println!("max eval-vs-train window prediction gap: {max_gap:.3e}");
    println!("on-expert-trace prediction MSE: {:.6}", tf_se / tf_n as f64);

    // How fast does a greedy rollout drift off the expert tube? Compare the
    // model-driven state against an oracle-driven episode from the same
    // start, and report the model's prediction error against what the
    // oracle would do at the model's own visited states.
    let oracle = OraclePolicy::new(task);
    for ep_seed in [424242u64, 7777, 31337] {
        let mut env = PointEnv::new(task, mode);
        let mut obs = env.reset(ep_seed);
        let mut hist_s: Vec<Vec<f64>> = Vec::new();
        let mut hist_a: Vec<Vec<f64>> = Vec::new();
        let mut hist_r: Vec<f64> = Vec::new();
        let mut hist_t: Vec<usize> = Vec::new();
        let mut cum = 0.0;
        println!("--- rollout seed {ep_seed}");
        for t in 0..150 {
            let mut s = flatten_state(&obs);
            norm.apply(&mut s);
            hist_s.push(s);
            hist_a.push(vec![0.0; adim]);
            hist_r.push(target - cum);
            hist_t.push(t);
            let w = build_window(k, sdim, adim, &hist_s, &hist_a, &hist_r, &hist_t);
            let mut tape = Tape64::new();
            let pred = model.forward(&mut tape, &w).expect("fwd");
            let act: Vec<f64> = tape.value(pred).data()[(k - 1) * adim..k * adim].to_vec();
            let oracle_act = oracle.act(&obs);
            let dev: f64 = act
                .iter()
                .zip(oracle_act.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            if t % 10 == 0 {
                println!(
                    "t={t:3} agent=({:+.3},{:+.3}) obj=({:+.3},{:+.3}) goal=({:+.3},{:+.3}) dev2={dev:.4} act=({:+.2},{:+.2}) oracle=({:+.2},{:+.2})",
                    obs.observation[0], obs.observation[1],
                    obs.achieved_goal[0], obs.achieved_goal[1],
                    obs.desired_goal[0], obs.desired_goal[1],
                    act[0], act[1], oracle_act[0], oracle_act[1]
                );
            }
            hist_a.last_mut().unwrap().copy_from_slice(&act);
            let sr = env.step(&act).expect("step");
            cum += sr.reward;
            obs = sr.observation;
            if sr.terminated {
                println!("terminated t={t} return {cum:.3}");
                break;
            }
            if sr.truncated {
                println!("truncated return {cum:.3}");
                break;
            }
        }
    }
}
