//! Binary checkpoint format: an 8-byte magic, a little-endian `u32` version,
//! a `u64` header length, a JSON header, then every parameter as
//! little-endian `f64` values in header order.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::graph::{ParamStore, Tensor};
use crate::error::CheckpointError;

pub const MAGIC: &[u8; 8] = b"HYSTCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header<M> {
    model: M,
    params: Vec<ParamShape>,
}

pub fn encode_checkpoint<M: Serialize>(model: &M, params: &ParamStore) -> Result<Vec<u8>, CheckpointError> {
    let shapes = params
        .names()
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| ParamShape {
            name: name.clone(),
            rows: t.nrows(),
            cols: t.ncols(),
        })
        .collect();
    let header = serde_json::to_vec(&Header { model, params: shapes })?;
    let mut out = Vec::with_capacity(20 + header.len() + params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in params.tensors() {
        for &x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint<M: DeserializeOwned>(bytes: &[u8]) -> Result<(M, ParamStore), CheckpointError> {
    let fail = |m: &str| CheckpointError::Format(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(fail("missing checkpoint magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::Format(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes.get(20..20 + header_len).ok_or_else(|| fail("truncated header"))?;
    let header: Header<M> = serde_json::from_slice(body)?;

    let mut data = &bytes[20 + header_len..];
    let mut store = ParamStore::new();
    for shape in &header.params {
        let n = shape.rows * shape.cols;
        if data.len() < n * 8 {
            return Err(CheckpointError::Format(format!("truncated data for {}", shape.name)));
        }
        let values = data[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        data = &data[n * 8..];
        let t = Tensor::from_shape_vec((shape.rows, shape.cols), values).expect("shape matches length");
        store.add(shape.name.clone(), t);
    }
    if !data.is_empty() {
        return Err(fail("trailing bytes after parameters"));
    }
    Ok((header.model, store))
}

pub fn save_checkpoint<M: Serialize>(path: &Path, model: &M, params: &ParamStore) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(model, params)?)?;
    Ok(())
}

pub fn load_checkpoint<M: DeserializeOwned>(path: &Path) -> Result<(M, ParamStore), CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}

/// Copies loaded values into `target`, requiring identical names and shapes.
pub fn restore_params(target: &mut ParamStore, loaded: &ParamStore) -> Result<(), CheckpointError> {
    if target.names() != loaded.names() {
        return Err(CheckpointError::Format("parameter names differ from the model".into()));
    }
    for (dst, src) in target.tensors_mut().iter_mut().zip(loaded.tensors()) {
        if dst.dim() != src.dim() {
            return Err(CheckpointError::Format("parameter shapes differ from the model".into()));
        }
        dst.assign(src);
    }
    Ok(())
}
