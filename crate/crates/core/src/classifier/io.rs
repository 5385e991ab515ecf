//! Model files: `RISM`, format version (u32), architecture JSON length (u64)
//! and bytes, parameter count (u64), then the parameters as `f64`. All
//! integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{Architecture, Model};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"RISM";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(m: &Model) -> Result<Vec<u8>> {
    let arch = serde_json::to_vec(&m.arch)?;
    let mut out = Vec::with_capacity(24 + arch.len() + 8 * m.params.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.len() as u64).to_le_bytes());
    out.extend_from_slice(&arch);
    out.extend_from_slice(&(m.params.len() as u64).to_le_bytes());
    for p in &m.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| Error::data("model file is truncated"))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    if take(4)? != MODEL_MAGIC {
        return Err(Error::data("not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::data(format!("unsupported model version {version}")));
    }
    let alen = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let arch: Architecture = serde_json::from_slice(take(alen)?)?;
    let n = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    if n != arch.network.param_count() {
        return Err(Error::data(format!(
            "architecture needs {} parameters, file has {n}",
            arch.network.param_count()
        )));
    }
    let raw = take(n.checked_mul(8).ok_or_else(|| Error::data("parameter count overflows"))?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if pos != bytes.len() {
        return Err(Error::data("trailing bytes after model parameters"));
    }
    arch.network.shapes()?;
    Ok(Model { arch, params })
}

pub fn save_model(path: &Path, m: &Model) -> Result<()> {
    let bytes = encode_model(m)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}
