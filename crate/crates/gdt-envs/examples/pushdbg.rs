use gdt_envs::{OraclePolicy, PointEnv, RewardMode, TaskKind};

fn main() {
    let mut env = PointEnv::new(TaskKind::Push, RewardMode::Sparse);
    let oracle = OraclePolicy::new(TaskKind::Push);
    let mut fails = Vec::new();
    for seed in 0..1000u64 {
        let mut obs = env.reset(seed);
        loop {
            let sr = env.step(&oracle.act(&obs)).unwrap();
            obs = sr.observation;
            if sr.terminated {
                break;
            }
            if sr.truncated {
                fails.push(seed);
                break;
            }
        }
    }
    println!("{} failures: {:?}", fails.len(), &fails[..fails.len().min(12)]);

    for &seed in fails.iter().take(3) {
        println!("--- seed {seed}");
        let mut obs = env.reset(seed);
        println!(
            "start agent=({:+.3},{:+.3}) obj=({:+.3},{:+.3}) goal=({:+.3},{:+.3})",
            obs.observation[0],
            obs.observation[1],
            obs.observation[2],
            obs.observation[3],
            obs.desired_goal[0],
            obs.desired_goal[1]
        );
        for t in 0..150 {
            let a = oracle.act(&obs);
            let sr = env.step(&a).unwrap();
            obs = sr.observation;
            if t % 15 == 0 || t > 140 {
                println!(
                    "t={t:3} agent=({:+.3},{:+.3}) obj=({:+.3},{:+.3}) act=({:+.2},{:+.2})",
                    obs.observation[0],
                    obs.observation[1],
                    obs.observation[2],
                    obs.observation[3],
                    a[0],
                    a[1]
                );
            }
            if sr.terminated || sr.truncated {
                break;
            }
        }
    }
}
