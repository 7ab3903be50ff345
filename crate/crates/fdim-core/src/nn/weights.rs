//! Versioned binary weight file.
//!
//! Layout: 8-byte magic, u32 format version, u64 JSON header length, JSON
//! header (tensor directory + free-form metadata), then little-endian f32
//! payload. The loader validates magic and version before touching anything
//! else.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{FdimError, Result};
use crate::tensor::Scalar;

use super::store::ParamStore;

pub const MAGIC: &[u8; 8] = b"FDIMWGT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the payload, in f32 elements.
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Outcome of loading a weight file into a store.
#[derive(Debug)]
pub struct LoadReport {
    pub meta: serde_json::Value,
    pub loaded: Vec<String>,
    /// Store parameters with no tensor in the file.
    pub missing: Vec<String>,
    /// File tensors with no matching store parameter.
    pub unknown: Vec<String>,
}

pub fn save<T: Scalar>(
    store: &ParamStore<T>,
    meta: serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut offset = 0u64;
    for (_, p) in store.iter() {
        let len = p.value.len() as u64;
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
            len,
        });
        offset += len;
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        tensors,
        meta,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, p) in store.iter() {
        for &v in p.value.iter() {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read metadata only (no tensor payload).
pub fn read_meta(path: impl AsRef<Path>) -> Result<serde_json::Value> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    Ok(header.meta)
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FdimError::WeightFile("bad magic, not a weight file".into()));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != FORMAT_VERSION {
        return Err(FdimError::WeightFile(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let header_len = u64::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.format_version != version {
        return Err(FdimError::WeightFile(
            "header/container version mismatch".into(),
        ));
    }
    Ok(header)
}

pub fn load<T: Scalar>(
    store: &mut ParamStore<T>,
    path: impl AsRef<Path>,
    allow_partial: bool,
) -> Result<LoadReport> {
    let mut r = BufReader::new(File::open(&path)?);
    let header = read_header(&mut r)?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let floats = payload.len() / 4;

    let mut loaded = Vec::new();
    let mut unknown = Vec::new();
    for entry in &header.tensors {
        let Some(id) = store.lookup(&entry.name) else {
            unknown.push(entry.name.clone());
            continue;
        };
        let expected_shape = store.value(id).shape().to_vec();
        if expected_shape != entry.shape {
            return Err(FdimError::WeightFile(format!(
                "shape mismatch for {}: file {:?} vs model {:?}",
                entry.name, entry.shape, expected_shape
            )));
        }
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        if end > floats {
            return Err(FdimError::WeightFile(format!(
                "tensor {} extends past payload end",
                entry.name
            )));
        }
        let mut data = Vec::with_capacity(entry.len as usize);
        for i in start..end {
            let bytes: [u8; 4] = payload[i * 4..i * 4 + 4].try_into().unwrap();
            data.push(T::from_f64(f32::from_le_bytes(bytes) as f64));
        }
        let arr = ArrayD::from_shape_vec(IxDyn(&entry.shape), data)
            .map_err(|e| FdimError::WeightFile(format!("tensor {}: {e}", entry.name)))?;
        store.set_value(id, arr);
        loaded.push(entry.name.clone());
    }

    let missing: Vec<String> = store
        .iter()
        .map(|(_, p)| p.name.clone())
        .filter(|n| !loaded.contains(n))
        .collect();
    if !missing.is_empty() && !allow_partial {
        return Err(FdimError::WeightFile(format!(
            "weight file is missing {} model tensors (first: {})",
            missing.len(),
            missing[0]
        )));
    }
    Ok(LoadReport {
        meta: header.meta,
        loaded,
        missing,
        unknown,
    })
}
