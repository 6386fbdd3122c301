use gdt_datasets::{record, RolloutPolicy};
use gdt_envs::{OraclePolicy, PointEnv, RewardMode, TaskKind};
use gdt_model::{DTConfig, DTModel};
use gdt_tensor::AdamConfig;
use gdt_trainer::{evaluate, state_norm, train, DTAgent, OracleAgent, TargetReturn, TrainConfig};
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

    // Harness self-check: the scripted expert through the eval loop.
    let oracle = OracleAgent::new(task);
    let rep = evaluate(&oracle, task, mode, 0.0, 2000, &[100, 200, 300]).expect("oracle eval");
    println!(
        "oracle harness: success {:.1}% ({}/{} eps), mean_return {:.3}",
        rep.success_rate, rep.successes, rep.episodes, rep.mean_return
    );

    let mut env = PointEnv::new(task, mode);
    let mut policy = OracleRollout(OraclePolicy::new(task));
    let ds = record(&mut env, &mut policy, 50_000, 1).expect("record");
    let mean_ret: f64 = ds.episodes.iter().map(|e| e.total_return()).sum::<f64>()
        / ds.episodes.len() as f64;
    println!(
        "data: best_return {:.3}, mean episode return {:.3}",
        ds.manifest.best_return, mean_ret
    );

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

    let agent = DTAgent::new(&model, state_norm(&ds, true));
    for target in [out.target_return, mean_ret, mean_ret * 0.8, -30.0] {
        let rep = evaluate(&agent, task, mode, target, 2000, &[100, 200, 300]).expect("eval");
        println!(
            "target {:+8.3}: success {:.1}% ({}/{} eps), mean_return {:.3}",
            target, rep.success_rate, rep.successes, rep.episodes, rep.mean_return
        );
    }
}
