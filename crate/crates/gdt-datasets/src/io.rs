use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::DatasetError;
use crate::types::{Dataset, Episode, PolicyTag, Transition};

const MAGIC: [u8; 4] = *b"GDE1";
const VERSION: u8 = 1;

/// Writes a dataset: magic, version byte, length-prefixed JSON manifest,
/// then one record per episode with length-prefixed float64 payloads.
pub fn save(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    let manifest = serde_json::to_vec(&ds.manifest)?;
    w.write_all(&(manifest.len() as u32).to_le_bytes())?;
    w.write_all(&manifest)?;
    for ep in &ds.episodes {
        write_episode(&mut w, ep)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_field(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(DatasetError::BadMagic(magic));
    }
    let mut version = [0u8; 1];
    read_field(&mut r, &mut version, "version")?;
    if version[0] != VERSION {
        return Err(DatasetError::VersionMismatch {
            got: version[0],
            expected: VERSION,
        });
    }
    let manifest_len = read_u32(&mut r, "manifest length")? as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    read_field(&mut r, &mut manifest_bytes, "manifest")?;
    let manifest: crate::types::DatasetManifest = serde_json::from_slice(&manifest_bytes)?;

    let mut episodes = Vec::with_capacity(manifest.n_episodes);
    for i in 0..manifest.n_episodes {
        episodes.push(read_episode(&mut r, i, &manifest.env_name)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(DatasetError::Corrupt(
            "trailing bytes after the last episode".into(),
        ));
    }
    let ds = Dataset { manifest, episodes };
    let n: usize = ds.episodes.iter().map(Episode::len).sum();
    if n != ds.manifest.n_transitions {
        return Err(DatasetError::Corrupt(format!(
            "manifest promises {} transitions, payload holds {n}",
            ds.manifest.n_transitions
        )));
    }
    Ok(ds)
}

fn write_episode(w: &mut impl Write, ep: &Episode) -> Result<(), DatasetError> {
    let n = ep.len();
    let state_dim = ep.transitions[0].flat_state.len();
    let action_dim = ep.transitions[0].action.len();
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(state_dim as u32).to_le_bytes())?;
    w.write_all(&(action_dim as u32).to_le_bytes())?;
    let last = &ep.transitions[n - 1];
    w.write_all(&[
        match ep.policy_tag {
            PolicyTag::Expert => 1,
            PolicyTag::Random => 0,
        },
        ep.success as u8,
        last.terminated as u8,
        last.truncated as u8,
    ])?;
    write_payload(w, ep.transitions.iter().flat_map(|t| &t.flat_state))?;
    write_payload(w, ep.transitions.iter().flat_map(|t| &t.action))?;
    write_payload(w, ep.transitions.iter().map(|t| &t.reward))?;
    write_payload(w, ep.returns_to_go.iter())?;
    Ok(())
}

fn write_payload<'a>(
    w: &mut impl Write,
    values: impl Iterator<Item = &'a f64>,
) -> Result<(), DatasetError> {
    let values: Vec<f64> = values.copied().collect();
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_episode(
    r: &mut impl Read,
    index: usize,
    env_name: &str,
) -> Result<Episode, DatasetError> {
    let what = |field: &str| format!("episode {index} {field}");
    let n = read_u32(r, &what("length"))? as usize;
    if n == 0 {
        return Err(DatasetError::Corrupt(what("length is zero")));
    }
    let state_dim = read_u32(r, &what("state dim"))? as usize;
    let action_dim = read_u32(r, &what("action dim"))? as usize;
    let mut flags = [0u8; 4];
    read_field(r, &mut flags, &what("flags"))?;
    let policy_tag = match flags[0] {
        1 => PolicyTag::Expert,
        0 => PolicyTag::Random,
        other => {
            return Err(DatasetError::Corrupt(what(&format!(
                "policy tag byte {other}"
            ))))
        }
    };
    let states = read_payload(r, n * state_dim, &what("flat states"))?;
    let actions = read_payload(r, n * action_dim, &what("actions"))?;
    let rewards = read_payload(r, n, &what("rewards"))?;
    let returns_to_go = read_payload(r, n, &what("returns-to-go"))?;

    let transitions: Vec<Transition> = (0..n)
        .map(|t| Transition {
            flat_state: states[t * state_dim..(t + 1) * state_dim].to_vec(),
            action: actions[t * action_dim..(t + 1) * action_dim].to_vec(),
            reward: rewards[t],
            terminated: t == n - 1 && flags[2] != 0,
            truncated: t == n - 1 && flags[3] != 0,
        })
        .collect();
    if flags[2] == 0 && flags[3] == 0 {
        return Err(DatasetError::Corrupt(what(
            "ends in neither terminated nor truncated",
        )));
    }
    Ok(Episode {
        transitions,
        returns_to_go,
        success: flags[1] != 0,
        env_name: env_name.to_string(),
        policy_tag,
    })
}

fn read_payload(r: &mut impl Read, expected: usize, what: &str) -> Result<Vec<f64>, DatasetError> {
    let len = read_u64(r, what)? as usize;
    if len != expected {
        return Err(DatasetError::Corrupt(format!(
            "{what}: payload length {len} does not match expected {expected}"
        )));
    }
    let mut bytes = vec![0u8; len * 8];
    read_field(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect())
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, DatasetError> {
    let mut buf = [0u8; 4];
    read_field(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, DatasetError> {
    let mut buf = [0u8; 8];
    read_field(r, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_field(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), DatasetError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DatasetError::Corrupt(format!("truncated while reading {what}"))
        } else {
            DatasetError::Io(e)
        }
    })
}
