//! Policy checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "CNPOLICY"
//! version  u32      FORMAT_VERSION
//! hdr_len  u32      byte length of the JSON header
//! header   JSON     dtype, endianness, layout, layer shapes, encoding
//!                   constants, action scaling, training config
//! weights           per layer: W (in x out, row-major) then b (out),
//!                   elements in `dtype`, little-endian
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nn::{Linear, Mlp, Scalar};
use super::obs::ObsConfig;
use super::sac::Actor;
use super::Policy;

pub const MAGIC: &[u8; 8] = b"CNPOLICY";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dtype: String,
    pub endianness: String,
    pub layout: String,
    /// `(fan_in, fan_out)` of each actor layer.
    pub layers: Vec<(usize, usize)>,
    pub obs: ObsConfig,
    pub f_max: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Free-form record of how the policy was trained.
    #[serde(default)]
    pub training: serde_json::Value,
}

pub fn encode_policy(policy: &Policy, training: serde_json::Value) -> Result<Vec<u8>, CheckpointError> {
    let header = CheckpointHeader {
        dtype: f32::DTYPE.to_string(),
        endianness: "little".into(),
        layout: "row-major".into(),
        layers: policy.actor.net.layers.iter().map(|l| l.w.dim()).collect(),
        obs: policy.obs,
        f_max: policy.f_max,
        log_std_min: policy.actor.log_std_min,
        log_std_max: policy.actor.log_std_max,
        training,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + policy.actor.net.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for l in &policy.actor.net.layers {
        for &x in l.w.iter() {
            x.to_le(&mut out);
        }
        for &x in l.b.iter() {
            x.to_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode_policy(bytes: &[u8]) -> Result<(Policy, CheckpointHeader), CheckpointError> {
    let take = |from: usize, n: usize| bytes.get(from..from + n).ok_or(CheckpointError::Truncated);
    if take(0, 8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(8, 4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let hlen = u32::from_le_bytes(take(12, 4)?.try_into().expect("4 bytes")) as usize;
    let header: CheckpointHeader = serde_json::from_slice(take(16, hlen)?)?;
    if header.dtype != f32::DTYPE || header.endianness != "little" || header.layout != "row-major" {
        return Err(CheckpointError::Inconsistent(format!(
            "unsupported encoding {}/{}/{}",
            header.dtype, header.endianness, header.layout
        )));
    }
    if header.layers.is_empty() || header.layers.windows(2).any(|w| w[0].1 != w[1].0) {
        return Err(CheckpointError::Inconsistent("layer shapes do not chain".into()));
    }
    if header.layers[0].0 != header.obs.dim() {
        return Err(CheckpointError::Inconsistent("input size does not match the observation encoding".into()));
    }

    let mut pos = 16 + hlen;
    let mut read = |n: usize| -> Result<Vec<f32>, CheckpointError> {
        let raw = take(pos, n * f32::BYTES)?;
        pos += n * f32::BYTES;
        Ok(raw.chunks_exact(f32::BYTES).map(f32::read_le).collect())
    };
    let mut layers = Vec::with_capacity(header.layers.len());
    for &(fan_in, fan_out) in &header.layers {
        let w = Array2::from_shape_vec((fan_in, fan_out), read(fan_in * fan_out)?)
            .map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
        let b = Array1::from_vec(read(fan_out)?);
        layers.push(Linear { w, b });
    }
    if pos != bytes.len() {
        return Err(CheckpointError::Inconsistent("trailing bytes after weights".into()));
    }
    let policy = Policy {
        actor: Actor { net: Mlp { layers }, log_std_min: header.log_std_min, log_std_max: header.log_std_max },
        obs: header.obs,
        f_max: header.f_max,
    };
    Ok((policy, header))
}

pub fn save_policy(path: &Path, policy: &Policy, training: serde_json::Value) -> Result<(), CheckpointError> {
    let bytes = encode_policy(policy, training)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(Policy, CheckpointHeader), CheckpointError> {
    decode_policy(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{SacAgent, SacConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let obs = ObsConfig { n_max: 3, ..Default::default() };
        let agent = SacAgent::<f32>::new(obs.dim(), SacConfig { hidden: vec![7, 5], ..Default::default() }, &mut rng);
        Policy::from_agent(&agent, obs)
    }

    #[test]
    fn round_trip_file() {
        let p = policy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_policy(&path, &p, serde_json::json!({"seed": 3})).unwrap();
        let (q, header) = load_policy(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(header.training["seed"], 3);
        assert_eq!(header.layers, vec![(20, 7), (7, 5), (5, 4)]);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_policy(&policy(), serde_json::Value::Null).unwrap();
        assert!(matches!(decode_policy(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated)));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_policy(&bad), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_policy(&bad), Err(CheckpointError::UnsupportedVersion(9))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_policy(&long), Err(CheckpointError::Inconsistent(_))));
    }
}
