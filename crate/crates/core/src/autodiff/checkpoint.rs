//! Parameter checkpoint format.
//!
//! `params.bin` is a sequence of entries, each laid out as
//!
//! ```text
//! u32 LE  name length in bytes
//! [u8]    utf-8 name
//! u32 LE  number of dims
//! [u64]   LE dims
//! [f64]   LE payload, row-major
//! ```
//!
//! `manifest.json` lists every entry with its shape and byte offsets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const PARAMS_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "dsr-params-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<u64>,
    /// Byte offset of the entry header.
    pub offset: u64,
    /// Byte offset of the f64 payload.
    pub data_offset: u64,
    pub data_len: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub file: String,
    pub entries: Vec<ManifestEntry>,
}

pub fn encode(store: &ParamStore) -> (Vec<u8>, Manifest) {
    let mut bytes = Vec::new();
    let mut entries = Vec::with_capacity(store.len());
    for id in store.ids() {
        let name = store.name(id);
        let value = store.value(id);
        let offset = bytes.len() as u64;
        bytes.extend_from_slice(&(name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(value.ndim() as u32).to_le_bytes());
        for &d in value.shape() {
            bytes.extend_from_slice(&(d as u64).to_le_bytes());
        }
        let data_offset = bytes.len() as u64;
        for &x in value.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        entries.push(ManifestEntry {
            name: name.to_string(),
            shape: value.shape().iter().map(|&d| d as u64).collect(),
            offset,
            data_offset,
            data_len: (value.len() * 8) as u64,
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        file: PARAMS_FILE.into(),
        entries,
    };
    (bytes, manifest)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses `params.bin` bytes into named tensors, in file order.
pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor)>, String> {
    let mut r = Reader { bytes, pos: 0 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| format!("bad utf-8 name: {e}"))?
            .to_string();
        let ndim = r.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

pub fn save(store: &ParamStore, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (bytes, manifest) = encode(store);
    fs::write(dir.join(PARAMS_FILE), bytes)?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Reads a checkpoint and checks it against its manifest.
pub fn load(dir: &Path) -> Result<Vec<(String, Tensor)>> {
    let fail = |msg: String| Error::Checkpoint {
        path: dir.to_path_buf(),
        msg,
    };
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format != FORMAT {
        return Err(fail(format!("unknown format `{}`", manifest.format)));
    }
    let bytes = fs::read(dir.join(&manifest.file))?;
    let entries = decode(&bytes).map_err(fail)?;
    if entries.len() != manifest.entries.len() {
        return Err(fail(format!(
            "manifest lists {} entries, file holds {}",
            manifest.entries.len(),
            entries.len()
        )));
    }
    for ((name, t), m) in entries.iter().zip(&manifest.entries) {
        let shape: Vec<u64> = t.shape().iter().map(|&d| d as u64).collect();
        if *name != m.name || shape != m.shape {
            return Err(fail(format!("entry `{name}` disagrees with manifest")));
        }
    }
    Ok(entries)
}

/// Overwrites every parameter of `store` from the checkpoint, matching by name.
pub fn load_into(store: &mut ParamStore, dir: &Path) -> Result<()> {
    let entries = load(dir)?;
    let mut seen = 0;
    for (name, t) in entries {
        let id = store.find(&name).ok_or_else(|| Error::Checkpoint {
            path: dir.to_path_buf(),
            msg: format!("unexpected parameter `{name}`"),
        })?;
        store.set_value(id, t)?;
        seen += 1;
    }
    if seen != store.len() {
        return Err(Error::Checkpoint {
            path: dir.to_path_buf(),
            msg: format!("checkpoint has {seen} of {} parameters", store.len()),
        });
    }
    Ok(())
}
