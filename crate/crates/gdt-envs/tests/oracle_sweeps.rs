use gdt_envs::{OraclePolicy, PointEnv, RewardMode, TaskKind};

/// Runs one seeded episode; returns (success, steps, object stayed in bounds).
fn rollout(env: &mut PointEnv, oracle: &OraclePolicy, seed: u64) -> (bool, usize, bool) {
    let mut obs = env.reset(seed);
    let mut in_bounds = true;
    for step in 1.. {
        let sr = env.step(&oracle.act(&obs)).unwrap();
        obs = sr.observation;
        for &g in &obs.achieved_goal {
            if !(-1.0..=1.0).contains(&g) || !g.is_finite() {
                in_bounds = false;
            }
        }
        if sr.terminated {
            return (true, step, in_bounds);
        }
        if sr.truncated {
            return (false, step, in_bounds);
        }
    }
    unreachable!()
}

fn sweep(task: TaskKind, episodes: u64) -> (f64, bool) {
    let mut env = PointEnv::new(task, RewardMode::Sparse);
    let oracle = OraclePolicy::new(task);
    let mut successes = 0u64;
    let mut bounds_ok = true;
    for seed in 0..episodes {
        let (ok, _, ib) = rollout(&mut env, &oracle, seed);
        successes += ok as u64;
        bounds_ok &= ib;
    }
    (successes as f64 / episodes as f64, bounds_ok)
}

#[test]
fn reach_oracle_succeeds_at_least_99_percent() {
    let (rate, _) = sweep(TaskKind::Reach, 1000);
    assert!(rate >= 0.99, "reach oracle success rate {rate}");
}

#[test]
fn push_oracle_succeeds_at_least_99_percent() {
    let (rate, bounds_ok) = sweep(TaskKind::Push, 1000);
    assert!(rate >= 0.99, "push oracle success rate {rate}");
    assert!(bounds_ok, "object left the plane/workspace");
}

#[test]
fn pickplace_oracle_succeeds_at_least_99_percent() {
    let (rate, _) = sweep(TaskKind::PickPlace, 1000);
    assert!(rate >= 0.99, "pickplace oracle success rate {rate}");
}

#[test]
fn satisfied_goal_yields_near_zero_action() {
    let mut env = PointEnv::new(TaskKind::Reach, RewardMode::Sparse);
    env.reset(0);
    env.force_state([0.4, -0.3], [0.0, 0.0], [0.4, -0.3]);
    let oracle = OraclePolicy::new(TaskKind::Reach);
    let sr = env.step(&[0.0, 0.0]).unwrap();
    let action = oracle.act(&sr.observation);
    assert!(action.iter().all(|a| a.abs() < 1e-12), "{action:?}");
}

#[test]
fn push_oracle_handles_agent_starting_on_top_of_object() {
    let mut env = PointEnv::new(TaskKind::Push, RewardMode::Sparse);
    let oracle = OraclePolicy::new(TaskKind::Push);
    env.reset(0);
    env.force_state([0.2, 0.2], [0.2, 0.2], [-0.5, -0.5]);
    let mut obs = env.step(&[0.0, 0.0]).unwrap().observation;
    let mut success = false;
    for _ in 0..env.spec().episode_horizon {
        let sr = match env.step(&oracle.act(&obs)) {
            Ok(sr) => sr,
            Err(_) => break,
        };
        obs = sr.observation;
        if sr.terminated {
            success = true;
            break;
        }
        if sr.truncated {
            break;
        }
    }
    assert!(success, "oracle failed from a coincident start");
}
