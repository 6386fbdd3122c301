//! Little-endian binary checkpoints: magic `GDT1`, then per-parameter
//! records of (name length u32, UTF-8 name, rank u32, extents u64 each,
//! raw f64 payload). Records repeat until end of file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::CheckpointError;
use crate::tensor::Tensor;

const MAGIC: [u8; 4] = *b"GDT1";

pub fn save_checkpoint(
    path: &Path,
    params: &[(String, Tensor<f64>)],
) -> Result<(), CheckpointError> {
    let mut seen = std::collections::BTreeSet::new();
    for (name, _) in params {
        if !seen.insert(name.as_str()) {
            return Err(CheckpointError::DuplicateName(name.clone()));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    for (name, tensor) in params {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &e in tensor.shape() {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for &x in tensor.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads every record, preserving file order. Duplicate names, a bad
/// magic, or a truncated record are errors.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor<f64>)>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CheckpointError::Corrupt("file shorter than magic".into()))?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let mut out = Vec::new();
    let mut names = std::collections::BTreeSet::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name_buf = vec![0u8; name_len];
        read_field(&mut r, &mut name_buf, "parameter name")?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not UTF-8".into()))?;
        if !names.insert(name.clone()) {
            return Err(CheckpointError::DuplicateName(name));
        }
        let mut rank_buf = [0u8; 4];
        read_field(&mut r, &mut rank_buf, "rank")?;
        let rank = u32::from_le_bytes(rank_buf) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut ext = [0u8; 8];
            read_field(&mut r, &mut ext, "extent")?;
            shape.push(u64::from_le_bytes(ext) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let mut x = [0u8; 8];
            read_field(&mut r, &mut x, "payload")?;
            data.push(f64::from_le_bytes(x));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| CheckpointError::Corrupt(format!("record {name}: {e}")))?;
        out.push((name, tensor));
    }
    Ok(out)
}

/// Convenience view over a loaded checkpoint keyed by name.
pub fn load_checkpoint_map(
    path: &Path,
) -> Result<BTreeMap<String, Tensor<f64>>, CheckpointError> {
    Ok(load_checkpoint(path)?.into_iter().collect())
}

fn read_field<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CheckpointError::Corrupt(format!("truncated while reading {what}"))
        } else {
            e.into()
        }
    })
}
