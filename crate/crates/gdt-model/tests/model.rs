use gdt_model::{
    action_loss, action_targets, DTConfig, DTModel, ForwardMode, ModelError, StateNorm,
    TrajectoryWindow,
};
use gdt_tensor::{Tape64, Tensor64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_config() -> DTConfig {
    DTConfig {
        context_length: 4,
        embed_dim: 16,
        n_layers: 2,
        n_heads: 2,
        state_dim: 4,
        action_dim: 2,
        goal_dim: 2,
        max_timestep: 12,
        dropout: 0.0,
    }
}

fn pseudo(salt: u64, t: usize, j: usize) -> f64 {
    ((salt * 31 + t as u64 * 7 + j as u64) as f64).sin()
}

fn demo_window(cfg: &DTConfig, salt: u64, n_real: usize) -> TrajectoryWindow {
    let k = cfg.context_length;
    assert!(n_real >= 1 && n_real <= k);
    let pad = k - n_real;
    let f = cfg.flat_state_dim();
    let mut w = TrajectoryWindow {
        returns_to_go: vec![0.0; k],
        states: vec![vec![0.0; f]; k],
        actions: vec![vec![0.0; cfg.action_dim]; k],
        timesteps: vec![0; k],
        mask: vec![false; k],
    };
    for i in 0..n_real {
        let t = pad + i;
        w.mask[t] = true;
        w.timesteps[t] = i;
        w.returns_to_go[t] = -((n_real - i) as f64) + 0.1 * pseudo(salt, t, 99);
        for j in 0..f {
            w.states[t][j] = pseudo(salt, t, j);
        }
        for j in 0..cfg.action_dim {
            w.actions[t][j] = 0.9 * pseudo(salt.wrapping_add(5), t, j);
        }
    }
    w
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn k1_window_tokenizes_to_three_tokens() {
    let cfg = DTConfig {
        context_length: 1,
        ..tiny_config()
    };
    let model = DTModel::new(cfg.clone(), 0).unwrap();
    let mut tape = Tape64::new();
    let tokens = model.tokenize(&mut tape, &demo_window(&cfg, 1, 1)).unwrap();
    assert_eq!(tape.value(tokens).shape(), &[3, cfg.embed_dim]);
}

#[test]
fn timestep_index_feeds_the_tokens() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 1).unwrap();
    let w1 = demo_window(&cfg, 3, 4);
    let mut w2 = w1.clone();
    for t in 0..cfg.context_length {
        w2.timesteps[t] += 1; // same content, shifted absolute time
    }
    let mut tape = Tape64::new();
    let t1 = model.tokenize(&mut tape, &w1).unwrap();
    let t2 = model.tokenize(&mut tape, &w2).unwrap();
    assert_ne!(tape.value(t1).data(), tape.value(t2).data());
}

#[test]
fn zeroed_parameters_tokenize_to_zero() {
    let cfg = tiny_config();
    let mut model = DTModel::new(cfg.clone(), 2).unwrap();
    for t in model.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    let mut tape = Tape64::new();
    let tokens = model.tokenize(&mut tape, &demo_window(&cfg, 4, 3)).unwrap();
    assert!(tape.value(tokens).data().iter().all(|&x| x == 0.0));
}

#[test]
fn out_of_range_timestep_is_rejected() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 3).unwrap();
    let mut w = demo_window(&cfg, 5, 4);
    w.timesteps = (cfg.max_timestep - 3..=cfg.max_timestep).collect();
    let mut tape = Tape64::new();
    match model.tokenize(&mut tape, &w) {
        Err(ModelError::TimestepRange { timestep, max }) => {
            assert_eq!(timestep, cfg.max_timestep);
            assert_eq!(max, cfg.max_timestep);
        }
        other => panic!("expected TimestepRange, got {other:?}", other = other.err()),
    }
}

#[test]
fn predictions_stay_inside_the_unit_box() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 4).unwrap();
    let mut tape = Tape64::new();
    let pred = model.forward(&mut tape, &demo_window(&cfg, 6, 4)).unwrap();
    let v = tape.value(pred);
    assert_eq!(v.shape(), &[cfg.context_length, cfg.action_dim]);
    assert!(v.data().iter().all(|x| x.abs() <= 1.0));
}

#[test]
fn current_action_does_not_leak_into_current_prediction() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 5).unwrap();
    let w1 = demo_window(&cfg, 7, 4);
    let mut w2 = w1.clone();
    w2.actions[2] = vec![-0.77, 0.31];

    let mut tape = Tape64::new();
    let p1 = model.forward(&mut tape, &w1).unwrap();
    let p2 = model.forward(&mut tape, &w2).unwrap();
    let (a, b) = (tape.value(p1).data(), tape.value(p2).data());
    let d = cfg.action_dim;
    for row in 0..=2 {
        assert_eq!(
            bits(&a[row * d..(row + 1) * d]),
            bits(&b[row * d..(row + 1) * d]),
            "prediction at timestep {row} must ignore the action taken at 2"
        );
    }
    assert_ne!(
        bits(&a[3 * d..4 * d]),
        bits(&b[3 * d..4 * d]),
        "later predictions should see the changed action"
    );
}

#[test]
fn future_perturbations_never_reach_the_past() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 6).unwrap();
    let w1 = demo_window(&cfg, 8, 4);
    let mut w2 = w1.clone();
    // rewrite everything at the final timestep
    w2.returns_to_go[3] += 1.5;
    w2.states[3] = vec![0.9; cfg.flat_state_dim()];
    w2.actions[3] = vec![0.5, -0.5];

    let mut tape = Tape64::new();
    let p1 = model.forward(&mut tape, &w1).unwrap();
    let p2 = model.forward(&mut tape, &w2).unwrap();
    let a = tape.value(p1).data().to_vec();
    let b = tape.value(p2).data().to_vec();
    let d = cfg.action_dim;
    assert_eq!(bits(&a[..3 * d]), bits(&b[..3 * d]));

    // while the return-to-go and state at t do steer the prediction at t
    let mut w3 = w1.clone();
    w3.returns_to_go[3] += 1.5;
    let p3 = model.forward(&mut tape, &w3).unwrap();
    assert_ne!(
        bits(&tape.value(p3).data()[3 * d..4 * d]),
        bits(&a[3 * d..4 * d])
    );
}

#[test]
fn batched_forward_matches_single_windows_bitwise() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 7).unwrap();
    let windows = [
        demo_window(&cfg, 10, 4),
        demo_window(&cfg, 11, 2),
        demo_window(&cfg, 12, 1),
    ];
    let mut tape = Tape64::new();
    let batch = model
        .forward_batch(&mut tape, &windows, ForwardMode::Eval)
        .unwrap();
    let batched = tape.value(batch.predictions).data().to_vec();

    let mut singles = Vec::new();
    for w in &windows {
        let mut t = Tape64::new();
        let p = model.forward(&mut t, w).unwrap();
        singles.extend_from_slice(t.value(p).data());
    }
    assert_eq!(bits(&batched), bits(&singles));
}

#[test]
fn loss_examples_and_mask_contract() {
    let mut tape = Tape64::new();
    // pred == target → 0
    let pred = tape.constant(Tensor64::from_rows(&[vec![0.2, -0.3], vec![0.1, 0.4]]).unwrap());
    let target = Tensor64::from_rows(&[vec![0.2, -0.3], vec![0.1, 0.4]]).unwrap();
    let zero = action_loss(&mut tape, pred, &target, &[true, true]).unwrap();
    assert_eq!(tape.value(zero).data()[0], 0.0);

    // single unmasked position, componentwise errors 0.3 and −0.4
    let pred = tape.constant(Tensor64::from_rows(&[vec![9.0, 9.0], vec![0.3, -0.4]]).unwrap());
    let target = Tensor64::from_rows(&[vec![-3.0, 2.0], vec![0.0, 0.0]]).unwrap();
    let loss = action_loss(&mut tape, pred, &target, &[false, true]).unwrap();
    assert!((tape.value(loss).data()[0] - 0.125).abs() < 1e-15);

    // masked values are free: rewrite the padded row, loss is bit-identical
    let pred2 = tape.constant(Tensor64::from_rows(&[vec![-7e6, 4e6], vec![0.3, -0.4]]).unwrap());
    let loss2 = action_loss(&mut tape, pred2, &target, &[false, true]).unwrap();
    assert_eq!(
        tape.value(loss).data()[0].to_bits(),
        tape.value(loss2).data()[0].to_bits()
    );

    // fully masked window is a contract error
    assert!(matches!(
        action_loss(&mut tape, pred, &target, &[false, false]),
        Err(ModelError::AllMasked)
    ));
}

#[test]
fn loss_gradient_skips_masked_rows() {
    let mut tape = Tape64::new();
    let pred = tape.leaf(
        Tensor64::from_rows(&[
            vec![0.5, -0.5],
            vec![0.25, 0.75],
            vec![-0.1, 0.2],
            vec![0.0, 1.0],
        ])
        .unwrap(),
        true,
    );
    let target = Tensor64::zeros(vec![4, 2]);
    let mask = [true, false, true, false];
    let loss = action_loss(&mut tape, pred, &target, &mask).unwrap();
    tape.backward(loss).unwrap();
    let g = tape.grad(pred).unwrap();

    // d/dp of mean squared error over 2 real rows × 2 dims: 2p/4
    for (i, &m) in mask.iter().enumerate() {
        for j in 0..2 {
            let expected = if m {
                2.0 * tape.value(pred).at2(i, j) / 4.0
            } else {
                0.0
            };
            assert!((g[i * 2 + j] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn action_targets_flatten_windows() {
    let cfg = tiny_config();
    let w = demo_window(&cfg, 13, 3);
    let (targets, mask) = action_targets(std::slice::from_ref(&w));
    assert_eq!(targets.shape(), &[4, 2]);
    assert_eq!(mask, w.mask);
    assert_eq!(targets.data()[2 * 2], w.actions[2][0]);
}

#[test]
fn parameter_count_is_a_pure_function_of_config() {
    let cfg = tiny_config();
    let m1 = DTModel::new(cfg.clone(), 100).unwrap();
    let m2 = DTModel::new(cfg.clone(), 200).unwrap();
    assert_eq!(m1.param_count(), cfg.param_count());
    assert_eq!(m1.param_count(), m2.param_count());

    let defaults = DTConfig::defaults(6, 2, 2, 60);
    let big = DTModel::new(defaults.clone(), 0).unwrap();
    assert_eq!(big.param_count(), defaults.param_count());
}

#[test]
fn same_seed_reproduces_initial_weights_exactly() {
    let cfg = tiny_config();
    let m1 = DTModel::new(cfg.clone(), 42).unwrap();
    let m2 = DTModel::new(cfg.clone(), 42).unwrap();
    let m3 = DTModel::new(cfg, 43).unwrap();
    for ((n1, t1), (n2, t2)) in m1.named_params().zip(m2.named_params()) {
        assert_eq!(n1, n2);
        assert_eq!(bits(t1.data()), bits(t2.data()), "{n1}");
    }
    assert!(m1
        .named_params()
        .zip(m3.named_params())
        .any(|((_, a), (_, b))| a.data() != b.data()));
}

#[test]
fn save_load_round_trips_weights_config_and_normalization() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 9).unwrap();
    let norm = StateNorm {
        mean: vec![0.5; cfg.flat_state_dim()],
        std: vec![2.0; cfg.flat_state_dim()],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    model.save(&path, &norm).unwrap();
    assert!(dir.path().join("model.ckpt.json").exists());

    let (loaded, loaded_norm) = DTModel::load(&path).unwrap();
    assert_eq!(loaded.config(), &cfg);
    assert_eq!(loaded_norm, norm);
    for ((n1, t1), (n2, t2)) in model.named_params().zip(loaded.named_params()) {
        assert_eq!(n1, n2);
        assert_eq!(bits(t1.data()), bits(t2.data()));
    }

    let w = demo_window(&cfg, 14, 4);
    let mut tape = Tape64::new();
    let a = model.forward(&mut tape, &w).unwrap();
    let b = loaded.forward(&mut tape, &w).unwrap();
    assert_eq!(bits(tape.value(a).data()), bits(tape.value(b).data()));
}

#[test]
fn load_rejects_missing_and_unexpected_parameters() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    model.save(&path, &StateNorm::identity(cfg.flat_state_dim())).unwrap();

    // drop one parameter
    let mut params = gdt_tensor::load_checkpoint(&path).unwrap();
    let dropped = params.remove(3);
    gdt_tensor::save_checkpoint(&path, &params).unwrap();
    match DTModel::load(&path) {
        Err(ModelError::MissingParam(name)) => assert_eq!(name, dropped.0),
        other => panic!("expected MissingParam, got {other:?}", other = other.err()),
    }

    // add a stray one
    params.push(dropped);
    params.push(("stray.weight".into(), Tensor64::zeros(vec![2, 2])));
    gdt_tensor::save_checkpoint(&path, &params).unwrap();
    match DTModel::load(&path) {
        Err(ModelError::UnexpectedParam(name)) => assert_eq!(name, "stray.weight"),
        other => panic!("expected UnexpectedParam, got {other:?}", other = other.err()),
    }
}

#[test]
fn dropout_is_seeded() {
    let cfg = DTConfig {
        dropout: 0.5,
        ..tiny_config()
    };
    let model = DTModel::new(cfg.clone(), 11).unwrap();
    let windows = [demo_window(&cfg, 15, 4)];
    let (targets, mask) = action_targets(&windows);

    let run = |seed: u64| {
        let mut tape = Tape64::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = model
            .forward_batch(&mut tape, &windows, ForwardMode::Train { rng: &mut rng })
            .unwrap();
        let loss = action_loss(&mut tape, out.predictions, &targets, &mask).unwrap();
        tape.value(loss).data()[0]
    };
    assert_eq!(run(1).to_bits(), run(1).to_bits());
    assert_ne!(run(1).to_bits(), run(2).to_bits());
}

#[test]
fn configs_are_validated() {
    let bad_heads = DTConfig {
        n_heads: 3,
        ..tiny_config()
    };
    assert!(matches!(
        DTModel::new(bad_heads, 0),
        Err(ModelError::Config(_))
    ));
    let zero_k = DTConfig {
        context_length: 0,
        ..tiny_config()
    };
    assert!(matches!(DTModel::new(zero_k, 0), Err(ModelError::Config(_))));
    let bad_dropout = DTConfig {
        dropout: 1.0,
        ..tiny_config()
    };
    assert!(matches!(
        DTModel::new(bad_dropout, 0),
        Err(ModelError::Config(_))
    ));
}

#[test]
fn windows_are_validated() {
    let cfg = tiny_config();
    let model = DTModel::new(cfg.clone(), 12).unwrap();
    let mut tape = Tape64::new();

    let mut right_padded = demo_window(&cfg, 16, 4);
    right_padded.mask = vec![true, true, false, false];
    assert!(matches!(
        model.tokenize(&mut tape, &right_padded),
        Err(ModelError::Window(_))
    ));

    let mut skipping = demo_window(&cfg, 17, 4);
    skipping.timesteps = vec![0, 2, 3, 4];
    assert!(matches!(
        model.tokenize(&mut tape, &skipping),
        Err(ModelError::Window(_))
    ));

    let mut short_state = demo_window(&cfg, 18, 4);
    short_state.states[1].pop();
    assert!(matches!(
        model.tokenize(&mut tape, &short_state),
        Err(ModelError::Window(_))
    ));
}
