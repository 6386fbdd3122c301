use gdt_datasets::{mix, record, subset, Dataset, DatasetError, PolicyTag, RandomPolicy};
use gdt_envs::{OraclePolicy, PointEnv, RewardMode, TaskKind};

fn expert_reach(n: usize, seed: u64) -> Dataset {
    let mut env = PointEnv::new(TaskKind::Reach, RewardMode::Sparse);
    let mut policy = OraclePolicy::new(TaskKind::Reach);
    record(&mut env, &mut policy, n, seed).unwrap()
}

fn random_reach(n: usize, seed: u64) -> Dataset {
    let mut env = PointEnv::new(TaskKind::Reach, RewardMode::Sparse);
    let mut policy = RandomPolicy::for_env(&env, seed ^ 0xbeef);
    record(&mut env, &mut policy, n, seed).unwrap()
}

fn expert_transitions(ds: &Dataset) -> usize {
    ds.episodes
        .iter()
        .filter(|e| e.policy_tag == PolicyTag::Expert)
        .map(|e| e.len())
        .sum()
}

#[test]
fn mix_fraction_one_is_all_expert() {
    let expert = expert_reach(3000, 1);
    let random = random_reach(500, 2);
    let mixed = mix(&expert, &random, 1.0, 2000, 10).unwrap();

    assert!(mixed.episodes.iter().all(|e| e.policy_tag == PolicyTag::Expert));
    assert_eq!(mixed.manifest.expert_fraction, 1.0);
    assert!(mixed.n_transitions() >= 2000);
}

#[test]
fn mix_fraction_zero_is_all_random() {
    let expert = expert_reach(500, 3);
    let random = random_reach(3000, 4);
    let mixed = mix(&expert, &random, 0.0, 2000, 10).unwrap();

    assert!(mixed.episodes.iter().all(|e| e.policy_tag == PolicyTag::Random));
    assert_eq!(mixed.manifest.expert_fraction, 0.0);
    assert!(mixed.n_transitions() >= 2000);
}

#[test]
fn mix_half_of_ten_thousand_lands_within_one_episode_of_target() {
    let expert = expert_reach(6000, 5);
    let random = random_reach(6000, 6);
    let mixed = mix(&expert, &random, 0.5, 10_000, 42).unwrap();

    let experts = expert_transitions(&mixed);
    assert!(
        (experts as i64 - 5000).unsigned_abs() <= 50,
        "expert transitions {experts}, wanted within 50 of 5000"
    );
    assert!(mixed.n_transitions() >= 10_000);
    assert!(mixed.n_transitions() < 10_000 + 50);
    let stored = mixed.manifest.expert_fraction;
    assert_eq!(stored, experts as f64 / mixed.n_transitions() as f64);
}

#[test]
fn mix_is_deterministic_and_seed_sensitive() {
    let expert = expert_reach(2000, 7);
    let random = random_reach(2000, 8);
    let a = mix(&expert, &random, 0.4, 3000, 99).unwrap();
    let b = mix(&expert, &random, 0.4, 3000, 99).unwrap();
    let c = mix(&expert, &random, 0.4, 3000, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.episodes, c.episodes);
}

#[test]
fn mix_reports_expert_shortfall_with_numbers() {
    let expert = expert_reach(200, 9);
    let random = random_reach(4000, 10);
    let err = mix(&expert, &random, 0.5, 6000, 1).unwrap_err();
    match &err {
        DatasetError::Insufficient {
            side,
            needed,
            available,
        } => {
            assert_eq!(*side, "expert");
            assert_eq!(*needed, 3000);
            assert_eq!(*available, expert.n_transitions());
        }
        other => panic!("expected Insufficient, got {other:?}"),
    }
    let msg = err.to_string();
    assert!(msg.contains("expert") && msg.contains("3000"), "{msg}");
}

#[test]
fn mix_reports_random_shortfall() {
    let expert = expert_reach(4000, 11);
    let random = random_reach(300, 12);
    let err = mix(&expert, &random, 0.25, 4000, 1).unwrap_err();
    match err {
        DatasetError::Insufficient { side, .. } => assert_eq!(side, "random"),
        other => panic!("expected Insufficient, got {other:?}"),
    }
}

#[test]
fn mix_rejects_incompatible_sources_and_bad_fractions() {
    let expert = expert_reach(300, 13);
    let mut env = PointEnv::new(TaskKind::Push, RewardMode::Sparse);
    let mut policy = RandomPolicy::for_env(&env, 14);
    let push_random = record(&mut env, &mut policy, 300, 14).unwrap();

    assert!(matches!(
        mix(&expert, &push_random, 0.5, 400, 0),
        Err(DatasetError::Incompatible(_))
    ));

    let random = random_reach(300, 15);
    assert!(matches!(
        mix(&expert, &random, 1.5, 100, 0),
        Err(DatasetError::Invalid(_))
    ));
    assert!(matches!(
        mix(&expert, &random, -0.1, 100, 0),
        Err(DatasetError::Invalid(_))
    ));
    assert!(matches!(
        mix(&expert, &random, 0.5, 0, 0),
        Err(DatasetError::Invalid(_))
    ));
}

fn episode_key(e: &gdt_datasets::Episode) -> (usize, String) {
    (
        e.len(),
        e.transitions
            .iter()
            .flat_map(|t| &t.flat_state)
            .map(|x| format!("{:x}", x.to_bits()))
            .collect::<Vec<_>>()
            .join(","),
    )
}

#[test]
fn subset_at_full_size_is_a_permutation() {
    let ds = random_reach(1500, 16);
    let sub = subset(&ds, ds.n_transitions(), 77).unwrap();

    assert_eq!(sub.n_transitions(), ds.n_transitions());
    assert_eq!(sub.episodes.len(), ds.episodes.len());
    let mut original: Vec<_> = ds.episodes.iter().map(episode_key).collect();
    let mut sampled: Vec<_> = sub.episodes.iter().map(episode_key).collect();
    original.sort();
    sampled.sort();
    assert_eq!(original, sampled);
}

#[test]
fn subset_takes_complete_episodes_from_the_original() {
    let ds = random_reach(2000, 17);
    let sub = subset(&ds, 800, 5).unwrap();

    assert!(sub.n_transitions() >= 800);
    let last_len = sub.episodes.last().unwrap().len();
    assert!(sub.n_transitions() - last_len < 800);
    let pool: std::collections::HashSet<_> = ds.episodes.iter().map(episode_key).collect();
    for ep in &sub.episodes {
        assert!(pool.contains(&episode_key(ep)));
        let end = ep.transitions.last().unwrap();
        assert!(end.terminated || end.truncated, "no partial episodes");
    }
}

#[test]
fn subset_is_deterministic_and_rejects_oversubscription() {
    let ds = random_reach(1000, 18);
    assert_eq!(subset(&ds, 400, 3).unwrap(), subset(&ds, 400, 3).unwrap());

    let err = subset(&ds, ds.n_transitions() + 1, 0).unwrap_err();
    assert!(matches!(err, DatasetError::Oversubscribed { .. }), "{err:?}");
}

#[test]
fn subset_preserves_composition_in_expectation() {
    let expert = expert_reach(4000, 19);
    let random = random_reach(4000, 20);
    let mixed = mix(&expert, &random, 0.5, 6000, 7).unwrap();
    let base = expert_transitions(&mixed) as f64 / mixed.n_transitions() as f64;

    let mut fractions = Vec::new();
    for seed in 0..20 {
        let sub = subset(&mixed, 2000, seed).unwrap();
        fractions.push(expert_transitions(&sub) as f64 / sub.n_transitions() as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!(
        (mean - base).abs() < 0.1,
        "mean subset expert fraction {mean} vs source {base}"
    );
}

#[test]
fn chained_operations_keep_episodes_closed_and_returns_consistent() {
    let expert = expert_reach(2500, 21);
    let random = random_reach(2500, 22);
    let mixed = mix(&expert, &random, 0.3, 3000, 5).unwrap();
    let sub = subset(&mixed, 1200, 6).unwrap();

    for ds in [&mixed, &sub] {
        assert_eq!(
            ds.manifest.n_transitions,
            ds.episodes.iter().map(|e| e.len()).sum::<usize>()
        );
        for ep in &ds.episodes {
            let end = ep.transitions.last().unwrap();
            assert!(end.terminated || end.truncated);
            let n = ep.len();
            assert_eq!(ep.returns_to_go[n - 1], ep.transitions[n - 1].reward);
            for i in 0..n - 1 {
                assert_eq!(
                    ep.returns_to_go[i],
                    ep.transitions[i].reward + ep.returns_to_go[i + 1]
                );
            }
        }
    }
}
