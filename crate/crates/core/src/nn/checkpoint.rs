//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//! `CSHK` · u32 version · u8 kind · str config-json ·
//! u32 n-vocabs · (str name · u32 n-tokens · str*)* ·
//! u32 n-params · (str name · u32 ndim · u32 dim* · f32 value*)*
//! where `str` is a u32 byte length followed by UTF-8 bytes.

use std::fmt;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::extraction::Vocabulary;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CSHK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    PathAttention,
    MlpCompletion,
    Probe,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::PathAttention => 1,
            ModelKind::MlpCompletion => 2,
            ModelKind::Probe => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ModelKind::PathAttention),
            2 => Some(ModelKind::MlpCompletion),
            3 => Some(ModelKind::Probe),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::PathAttention => "path-attention (cs)",
            ModelKind::MlpCompletion => "mlp-completion (cc)",
            ModelKind::Probe => "probe set",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config_json: String,
    pub vocabs: Vec<(String, Vocabulary)>,
    pub params: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn param(&self, name: &str) -> Result<&Tensor<f32>> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn vocab(&self, name: &str) -> Result<&Vocabulary> {
        self.vocabs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Checkpoint(format!("missing vocabulary `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.kind.tag());
        put_str(&mut out, &self.config_json);
        put_u32(&mut out, self.vocabs.len());
        for (name, vocab) in &self.vocabs {
            put_str(&mut out, name);
            put_u32(&mut out, vocab.len());
            for token in vocab.tokens() {
                put_str(&mut out, token);
            }
        }
        put_u32(&mut out, self.params.len());
        for (name, t) in &self.params {
            put_str(&mut out, name);
            put_u32(&mut out, t.shape().len());
            for &d in t.shape() {
                put_u32(&mut out, d);
            }
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let tag = r.take(1)?[0];
        let kind = ModelKind::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown model tag {tag}")))?;
        let config_json = r.string()?;
        let mut vocabs = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let n = r.u32()?;
            let tokens = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
            vocabs.push((name, Vocabulary::from_tokens(tokens, 1, true)));
        }
        let mut params = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let ndim = r.u32()?;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push((name, Tensor::from_vec(&shape, values)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            kind,
            config_json,
            vocabs,
            params,
        })
    }

    /// Parses and checks the kind tag in one go.
    pub fn from_bytes_as(bytes: &[u8], expected: ModelKind) -> Result<Self> {
        let ck = Self::from_bytes(bytes)?;
        if ck.kind != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, expected {expected}",
                ck.kind
            )));
        }
        Ok(ck)
    }
}

fn put_u32(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: needed {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}
