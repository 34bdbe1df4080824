//! Portable checkpoint files: a JSON manifest (model kind, layer config,
//! seed) followed by the named parameter matrices as little-endian f64,
//! round-tripping bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GraphiteModel, ModelConfig, ModelError};
use crate::tensor::{Mat, ParamStore};

const MAGIC: &[u8; 4] = b"GRCK";
const FORMAT_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("payload truncated: parameter `{0}`")]
    Truncated(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub seed: u64,
    pub params: Vec<ParamEntry>,
}

pub fn save_checkpoint(path: &Path, model: &GraphiteModel, seed: u64) -> Result<(), CheckpointError> {
    let manifest = Manifest {
        config: model.config().clone(),
        seed,
        params: model
            .params()
            .iter()
            .map(|(name, m)| ParamEntry { name: name.to_string(), rows: m.rows(), cols: m.cols() })
            .collect(),
    };
    let header = serde_json::to_vec(&manifest)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    for (_, m) in model.params().iter() {
        for &v in m.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(GraphiteModel, u64), CheckpointError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut len_bytes = [0u8; 8];
    input.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    input.read_exact(&mut header)?;
    let manifest: Manifest = serde_json::from_slice(&header)?;

    let mut params = ParamStore::new();
    let mut buf = [0u8; 8];
    for entry in &manifest.params {
        let mut data = Vec::with_capacity(entry.rows * entry.cols);
        for _ in 0..entry.rows * entry.cols {
            input
                .read_exact(&mut buf)
                .map_err(|_| CheckpointError::Truncated(entry.name.clone()))?;
            data.push(f64::from_le_bytes(buf));
        }
        params.insert(entry.name.clone(), Mat::from_vec(entry.rows, entry.cols, data));
    }
    let model = GraphiteModel::from_parts(manifest.config, params)?;
    Ok((model, manifest.seed))
}
