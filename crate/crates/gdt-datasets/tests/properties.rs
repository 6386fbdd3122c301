use gdt_datasets::{mix, subset, Dataset, Episode, PolicyTag, Transition};
use gdt_envs::RewardMode;
use proptest::prelude::*;

fn synthetic_episode(lengths_seed: (usize, u64), tag: PolicyTag) -> Episode {
    let (len, salt) = lengths_seed;
    let transitions = (0..len)
        .map(|i| Transition {
            flat_state: vec![i as f64 + salt as f64, -(i as f64)],
            action: vec![0.1 * i as f64],
            reward: (i as f64).sin() - 0.5,
            terminated: i == len - 1 && salt % 2 == 0,
            truncated: i == len - 1 && salt % 2 != 0,
        })
        .collect();
    Episode::new(transitions, "synthetic".into(), tag).unwrap()
}

fn synthetic_pool(lengths: &[usize], tag: PolicyTag, salt: u64) -> Dataset {
    let episodes = lengths
        .iter()
        .enumerate()
        .map(|(i, &len)| synthetic_episode((len, salt + i as u64), tag))
        .collect();
    Dataset::from_episodes(episodes, "synthetic".into(), RewardMode::Dense, salt).unwrap()
}

proptest! {
    #[test]
    fn returns_to_go_obey_the_suffix_recurrence(
        rewards in prop::collection::vec(-100.0f64..100.0, 1..200)
    ) {
        let n = rewards.len();
        let transitions: Vec<Transition> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| Transition {
                flat_state: vec![r],
                action: vec![0.0],
                reward: r,
                terminated: false,
                truncated: i == n - 1,
            })
            .collect();
        let ep = Episode::new(transitions, "synthetic".into(), PolicyTag::Random).unwrap();

        prop_assert_eq!(ep.returns_to_go.len(), n);
        prop_assert_eq!(ep.returns_to_go[n - 1], rewards[n - 1]);
        for i in 0..n - 1 {
            prop_assert_eq!(ep.returns_to_go[i], rewards[i] + ep.returns_to_go[i + 1]);
        }
        let naive: f64 = rewards.iter().rev().sum();
        prop_assert_eq!(ep.total_return(), naive);
    }

    #[test]
    fn mixture_accounting_is_exact(
        expert_lengths in prop::collection::vec(1usize..=6, 60),
        random_lengths in prop::collection::vec(1usize..=6, 60),
        fraction_tenths in 0u32..=10,
        total in 10usize..=50,
        seed in 0u64..1000,
    ) {
        let expert = synthetic_pool(&expert_lengths, PolicyTag::Expert, 1000);
        let random = synthetic_pool(&random_lengths, PolicyTag::Random, 2000);
        let fraction = fraction_tenths as f64 / 10.0;
        let max_len = 6;

        let mixed = mix(&expert, &random, fraction, total, seed).unwrap();

        let n = mixed.n_transitions();
        let experts: usize = mixed
            .episodes
            .iter()
            .filter(|e| e.policy_tag == PolicyTag::Expert)
            .map(|e| e.len())
            .sum();

        prop_assert!(n >= total, "filled {n} of {total}");
        prop_assert!(n < total + max_len, "overshot by a whole episode: {n} vs {total}");
        let target = fraction * total as f64;
        prop_assert!(
            (experts as f64 - target).abs() < max_len as f64,
            "expert {experts} vs target {target}"
        );
        prop_assert_eq!(mixed.manifest.expert_fraction, experts as f64 / n as f64);
        prop_assert_eq!(mixed.manifest.n_episodes, mixed.episodes.len());
        if fraction == 1.0 {
            prop_assert_eq!(experts, n);
        }
        if fraction == 0.0 {
            prop_assert_eq!(experts, 0);
        }
    }

    #[test]
    fn subsets_stay_closed_under_chaining(
        lengths in prop::collection::vec(1usize..=8, 20..40),
        budget_frac in 0.2f64..1.0,
        seed in 0u64..1000,
    ) {
        let pool = synthetic_pool(&lengths, PolicyTag::Random, 1);
        let budget = ((pool.n_transitions() as f64 * budget_frac) as usize).max(1);
        let sub = subset(&pool, budget, seed).unwrap();

        prop_assert!(sub.n_transitions() >= budget);
        let last = sub.episodes.last().unwrap().len();
        prop_assert!(sub.n_transitions() - last < budget);
        for ep in &sub.episodes {
            let end = ep.transitions.last().unwrap();
            prop_assert!(end.terminated || end.truncated);
            prop_assert_eq!(ep.returns_to_go.len(), ep.len());
        }
        prop_assert_eq!(
            sub.manifest.n_transitions,
            sub.episodes.iter().map(|e| e.len()).sum::<usize>()
        );
    }
}
