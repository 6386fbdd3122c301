use std::fs;
use std::io::Write;

use gdt_tensor::{load_checkpoint, load_checkpoint_map, save_checkpoint, CheckpointError, Tensor64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(seed: u64) -> Vec<(String, Tensor64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<Vec<usize>> = vec![vec![4, 3], vec![7], vec![], vec![2, 2, 2]];
    shapes
        .into_iter()
        .enumerate()
        .map(|(i, shape)| {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            (format!("param.{i}"), Tensor64::new(shape, data).unwrap())
        })
        .collect()
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.gdt");
    let params = random_params(101);
    save_checkpoint(&path, &params).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(params.len(), loaded.len());
    for ((n0, t0), (n1, t1)) in params.iter().zip(&loaded) {
        assert_eq!(n0, n1);
        assert_eq!(t0.shape(), t1.shape());
        // bitwise, not approximate
        for (a, b) in t0.data().iter().zip(t1.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn map_view_keys_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.gdt");
    let params = random_params(7);
    save_checkpoint(&path, &params).unwrap();
    let map = load_checkpoint_map(&path).unwrap();
    assert_eq!(map.len(), params.len());
    assert!(map.contains_key("param.2"));
}

#[test]
fn bad_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.gdt");
    fs::write(&path, b"NOPE").unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(CheckpointError::BadMagic(_))
    ));
}

#[test]
fn truncated_payload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.gdt");
    save_checkpoint(&path, &random_params(33)).unwrap();
    let bytes = fs::read(&path).unwrap();
    let cut = fs::File::create(&path).unwrap();
    let mut cut = std::io::BufWriter::new(cut);
    cut.write_all(&bytes[..bytes.len() - 5]).unwrap();
    cut.flush().unwrap();
    match load_checkpoint(&path) {
        Err(CheckpointError::Corrupt(msg)) => assert!(msg.contains("truncated"), "{msg}"),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn empty_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.gdt");
    fs::write(&path, b"").unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(CheckpointError::Corrupt(_))
    ));
}

#[test]
fn duplicate_names_rejected_on_save() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.gdt");
    let t = Tensor64::zeros(vec![2]);
    let params = vec![("w".to_string(), t.clone()), ("w".to_string(), t)];
    assert!(matches!(
        save_checkpoint(&path, &params),
        Err(CheckpointError::DuplicateName(_))
    ));
}

#[test]
fn duplicate_names_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.gdt");
    // two records with the same name, crafted by hand
    let mut bytes: Vec<u8> = b"GDT1".to_vec();
    for _ in 0..2 {
        bytes.extend(1u32.to_le_bytes());
        bytes.push(b'w');
        bytes.extend(1u32.to_le_bytes());
        bytes.extend(1u64.to_le_bytes());
        bytes.extend(2.5f64.to_le_bytes());
    }
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(CheckpointError::DuplicateName(_))
    ));
}

#[test]
fn single_element_tensor_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scalar.gdt");
    let params = vec![("step".to_string(), Tensor64::scalar(42.0))];
    save_checkpoint(&path, &params).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded[0].1.shape(), &[1]);
    assert_eq!(loaded[0].1.data(), &[42.0]);
}
