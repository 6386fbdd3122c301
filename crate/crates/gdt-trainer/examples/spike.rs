use gdt_datasets::{record, ExpertPolicy};
use gdt_envs::{PointEnv, RewardMode, TaskKind};
use gdt_model::{DTConfig, DTModel};
use gdt_tensor::AdamConfig;
use gdt_trainer::{evaluate, state_norm, train, DTAgent, TargetReturn, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task = match args.get(1).map(|s| s.as_str()).unwrap_or("reach") {
        "push" => TaskKind::Push,
        "pickplace" => TaskKind::PickPlace,
        _ => TaskKind::Reach,
    };
    let mode = match args.get(2).map(|s| s.as_str()).unwrap_or("dense") {
        "sparse" => RewardMode::Sparse,
        _ => RewardMode::Dense,
    };
    let n_updates: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let embed: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(32);
    let k: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(8);
    let batch: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(32);
    let lr: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let n_layers: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(2);
    let eval_steps: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(2000);

    let t0 = Instant::now();
    let mut env = PointEnv::new(task, mode);
    let mut policy = ExpertPolicy::for_env(&env, 7);
    let ds = record(&mut env, &mut policy, 50_000, 1).expect("record");
    println!(
        "gen: {} episodes, {} transitions, best_return {:.3}, {:?}",
        ds.episodes.len(),
        ds.manifest.n_transitions,
        ds.manifest.best_return,
        t0.elapsed()
    );

    let spec = env.spec();
    let cfg = DTConfig {
        context_length: k,
        embed_dim: embed,
        n_layers,
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
    println!("model: {} params", model.param_count());

    let tcfg = TrainConfig {
        batch_size: batch,
        n_updates,
        eval_interval: n_updates,
        seed: 0,
        target_return: TargetReturn::BestInDataset,
        normalization: true,
        optimizer: AdamConfig {
            lr,
            warmup_steps: 100,
            ..AdamConfig::default()
        },
        max_grad_norm: 1.0,
    };
    let t1 = Instant::now();
    let mut last_print = Instant::now();
    let mut progress = |u: usize, loss: f64| {
        if last_print.elapsed().as_secs() >= 5 || u == 0 {
            println!("  update {u}: loss {loss:.6} ({:?})", t1.elapsed());
            last_print = Instant::now();
        }
    };
    let out = train(&mut model, &ds, &tcfg, Some(&mut progress)).expect("train");
    println!(
        "train: final loss {:.6}, target_return {:.3}, {:?}",
        out.losses.last().unwrap().1,
        out.target_return,
        t1.elapsed()
    );

    let t2 = Instant::now();
    let agent = DTAgent::new(&model, state_norm(&ds, true));
    let report = evaluate(&agent, task, mode, out.target_return, eval_steps, &[100, 200, 300]).expect("eval");
    println!(
        "eval: success {:.1}% ({} / {} episodes), mean_return {:.3}, {:?}",
        report.success_rate,
        report.successes,
        report.episodes,
        report.mean_return,
        t2.elapsed()
    );
    for s in &report.per_seed {
        println!(
            "  seed {}: {:.1}% ({}/{} eps, {} steps)",
            s.seed, s.success_rate, s.successes, s.episodes, s.timesteps
        );
    }
    println!("total: {:?}", t0.elapsed());
}
