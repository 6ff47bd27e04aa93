//! Binary checkpoint of a [`NetworkModel`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "RELNETCK"
//! version      u32      currently 1
//! desc_len     u32
//! descriptor   desc_len bytes of JSON: {"spec": ModelSpec, "vocab": Vocabulary}
//! n_tensors    u32
//! per tensor:
//!   name_len   u32
//!   name       name_len bytes of UTF-8
//!   len        u64      number of f64 values
//!   values     len × 8 bytes, IEEE-754 binary64
//! checksum     32 bytes SHA-256 of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{ModelSpec, NetworkModel, Topology};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RELNETCK";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    spec: ModelSpec,
    vocab: Vocabulary,
}

pub fn checkpoint_bytes(model: &NetworkModel) -> Result<Vec<u8>> {
    let desc = serde_json::to_vec(&Descriptor { spec: model.spec.clone(), vocab: model.vocab.clone() })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(&desc);
    let tensors = model.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, values) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn save_checkpoint(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a relnet checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version} (expected {VERSION})")));
    }
    if bytes.len() < 12 + DIGEST_LEN {
        return Err(Error::Checkpoint("checksum mismatch: file is truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch: file is corrupted or truncated".into()));
    }
    let mut r = Reader { buf: body, pos: 12 };
    let desc_len = r.u32()? as usize;
    let desc: Descriptor =
        serde_json::from_slice(r.take(desc_len)?).map_err(|e| Error::Checkpoint(format!("bad descriptor: {e}")))?;
    let mut model = NetworkModel::new(desc.spec, desc.vocab, None, 0)?;
    let expected: Vec<(String, usize)> = model.named_tensors().into_iter().map(|(n, t)| (n, t.len())).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!("descriptor implies {} tensors, file holds {count}", expected.len())));
    }
    let mut values = Vec::with_capacity(count);
    for (want_name, want_len) in &expected {
        let name_len = r.u32()? as usize;
        let name =
            std::str::from_utf8(r.take(name_len)?).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != want_name {
            return Err(Error::Checkpoint(format!("expected tensor `{want_name}`, found `{name}`")));
        }
        let len = r.u64()? as usize;
        if len != *want_len {
            return Err(Error::Checkpoint(format!("tensor `{name}` has {len} values, expected {want_len}")));
        }
        let raw = r.take(len * 8)?;
        values.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Vec<f64>>());
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    for (dst, src) in model.all_tensors_mut().into_iter().zip(values) {
        dst.copy_from_slice(&src);
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads a checkpoint and rejects it unless its topology equals `expected`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &Topology) -> Result<NetworkModel> {
    let path = path.as_ref();
    let model = load_checkpoint(path)?;
    if &model.spec.topology != expected {
        return Err(Error::Checkpoint(format!(
            "{}: checkpoint holds topology {}, expected {}",
            path.display(),
            serde_json::to_string(&model.spec.topology)?,
            serde_json::to_string(expected)?
        )));
    }
    Ok(model)
}
