//! Named-vector files.
//!
//! Binary layout: 8-byte magic `ATEMVEC1`, `dim: u32`, `count: u64`, then
//! `count` records of `{id_len: u16, id bytes (UTF-8), dim x f32}`; every
//! integer and float is little-endian. The text variant is one
//! whitespace-separated `id v1 v2 ...` line per vector.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{AtemError, Result};

pub const MAGIC: &[u8; 8] = b"ATEMVEC1";

/// An ordered table of id-labelled vectors of one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NamedVectors {
    pub dim: usize,
    pub ids: Vec<String>,
    pub data: Vec<f32>,
}

impl NamedVectors {
    pub fn new(dim: usize) -> Self {
        NamedVectors {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(AtemError::DimMismatch {
                expected: self.dim,
                found: v.len(),
                context: "push".into(),
            });
        }
        self.ids.push(id.into());
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().map(|s| s.as_str()).zip(self.data.chunks(self.dim.max(1)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4 + self.ids.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(AtemError::Format("bad vector file magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        read_exact(&mut r, &mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        read_exact(&mut r, &mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut out = NamedVectors::new(dim);
        let mut b2 = [0u8; 2];
        let mut v = vec![0f32; dim];
        for _ in 0..count {
            read_exact(&mut r, &mut b2)?;
            let len = u16::from_le_bytes(b2) as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut r, &mut id)?;
            let id = String::from_utf8(id).map_err(|e| AtemError::Format(e.to_string()))?;
            for x in v.iter_mut() {
                read_exact(&mut r, &mut b4)?;
                *x = f32::from_le_bytes(b4);
            }
            out.push(id, &v)?;
        }
        if !r.is_empty() {
            return Err(AtemError::Format("trailing bytes after vector records".into()));
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, v) in self.iter() {
            s.push_str(id);
            for x in v {
                s.push(' ');
                s.push_str(&x.to_string());
            }
            s.push('\n');
        }
        s
    }

    /// Parse the text variant. Rows of differing length are fatal.
    pub fn from_text(reader: impl Read) -> Result<Self> {
        let mut out: Option<NamedVectors> = None;
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| AtemError::io("<text vectors>", e))?;
            let mut parts = line.split_whitespace();
            let Some(id) = parts.next() else { continue };
            let v: Vec<f32> = parts
                .map(|p| p.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| AtemError::Format(format!("line {}: {e}", lineno + 1)))?;
            let table = out.get_or_insert_with(|| NamedVectors::new(v.len()));
            if v.len() != table.dim {
                return Err(AtemError::DimMismatch {
                    expected: table.dim,
                    found: v.len(),
                    context: format!("line {}", lineno + 1),
                });
            }
            table.push(id, &v)?;
        }
        Ok(out.unwrap_or_default())
    }

    /// Load either variant; binary is recognised by its magic.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| AtemError::io(path, e))?;
        if bytes.starts_with(MAGIC) {
            Self::from_bytes(&bytes)
        } else {
            Self::from_text(bytes.as_slice())
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| AtemError::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| AtemError::io(path, e))
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| AtemError::Format("truncated vector file".into()))
}
