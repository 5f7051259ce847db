//! Binary network checkpoints.
//!
//! Layout: 5 magic bytes, a little-endian `u32` header length, the JSON
//! header, then every tensor listed in the header as little-endian `f32`, in
//! header order. Tensor order is: stem conv and batch norm, each residual
//! block (first conv-BN, second conv-BN, projection if any), the two hidden
//! head layers, and the output conv with its bias. Batch norm tensors are
//! gamma, beta, running mean, running variance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::{FcnNet, NetworkSpec};

pub const POLICY_MAGIC: [u8; 5] = *b"SIMQ1";
pub const PREDICTOR_MAGIC: [u8; 5] = *b"SIMP1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkSpec,
    pub tensors: Vec<TensorEntry>,
    /// Resolved run configuration and seeds.
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn write_checkpoint<T: Scalar, W: Write>(
    magic: [u8; 5],
    net: &FcnNet<T>,
    metadata: &serde_json::Value,
    mut w: W,
) -> Result<()> {
    let params = net.params();
    let header = CheckpointHeader {
        network: net.spec().clone(),
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                len: p.value.len(),
            })
            .collect(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(&magic)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for p in params {
        for v in &p.value {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn load_err(reason: impl Into<String>) -> Error {
    Error::Load {
        what: "checkpoint".into(),
        reason: reason.into(),
    }
}

pub fn read_checkpoint<T: Scalar, R: Read>(magic: [u8; 5], mut r: R) -> Result<(FcnNet<T>, CheckpointHeader)> {
    let mut m = [0u8; 5];
    r.read_exact(&mut m).map_err(|e| load_err(e.to_string()))?;
    if m != magic {
        return Err(load_err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|e| load_err(e.to_string()))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json).map_err(|e| load_err(e.to_string()))?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| load_err(e.to_string()))?;
    let mut net = FcnNet::new(header.network.clone(), 0).map_err(|e| load_err(e.to_string()))?;
    {
        let params = net.params_mut();
        if params.len() != header.tensors.len() {
            return Err(load_err("tensor count does not match network spec"));
        }
        let mut buf = [0u8; 4];
        for (p, entry) in params.into_iter().zip(&header.tensors) {
            if p.name != entry.name || p.value.len() != entry.len {
                return Err(load_err(format!("tensor {} does not match network spec", entry.name)));
            }
            for v in p.value.iter_mut() {
                r.read_exact(&mut buf).map_err(|e| load_err(format!("truncated parameters: {e}")))?;
                *v = T::lit(f32::from_le_bytes(buf) as f64);
            }
        }
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(load_err("trailing bytes after parameters"));
    }
    Ok((net, header))
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    magic: [u8; 5],
    net: &FcnNet<T>,
    metadata: &serde_json::Value,
) -> Result<()> {
    write_checkpoint(magic, net, metadata, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint<T: Scalar>(path: &Path, magic: [u8; 5]) -> Result<(FcnNet<T>, CheckpointHeader)> {
    let f = File::open(path).map_err(|e| load_err(format!("{}: {e}", path.display())))?;
    read_checkpoint(magic, BufReader::new(f))
}
