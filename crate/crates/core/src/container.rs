//! Self-describing binary container shared by checkpoints and rig files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic  b"AVCRAFT1"
//! offset 8   u32       header length in bytes (N)
//! offset 12  N bytes   UTF-8 JSON header
//! offset 12+N          f32 payload, blocks stored back to back in header order
//! ```
//!
//! The JSON header always carries `kind`, `format_version`, `meta` (free-form,
//! owned by the writer) and `blocks`, a list of `{name, shape, offset, len}`
//! where `offset`/`len` count f32 values from the start of the payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AVCRAFT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Block {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    format_version: u32,
    meta: serde_json::Value,
    blocks: Vec<BlockEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub format_version: u32,
    pub meta: serde_json::Value,
    pub blocks: Vec<Block>,
}

impl Container {
    pub fn new(kind: impl Into<String>, format_version: u32, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            format_version,
            meta,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(block);
    }

    pub fn block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Format(format!("missing block `{name}`")))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut offset = 0;
        let mut entries = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let expected: usize = b.shape.iter().product();
            if expected != b.data.len() {
                return Err(Error::Format(format!(
                    "block `{}` has shape {:?} but {} values",
                    b.name,
                    b.shape,
                    b.data.len()
                )));
            }
            entries.push(BlockEntry {
                name: b.name.clone(),
                shape: b.shape.clone(),
                offset,
                len: b.data.len(),
            });
            offset += b.data.len();
        }
        let header = Header {
            kind: self.kind.clone(),
            format_version: self.format_version,
            meta: self.meta.clone(),
            blocks: entries,
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        let mut buf = Vec::with_capacity(offset * 4);
        for b in &self.blocks {
            for v in &b.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() % 4 != 0 {
            return Err(Error::Format("payload is not a whole number of f32 values".into()));
        }
        let floats: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for e in header.blocks {
            let end = e.offset + e.len;
            if end > floats.len() || e.shape.iter().product::<usize>() != e.len {
                return Err(Error::Format(format!("block `{}` is truncated or malformed", e.name)));
            }
            blocks.push(Block {
                name: e.name,
                shape: e.shape,
                data: floats[e.offset..end].to_vec(),
            });
        }
        Ok(Self {
            kind: header.kind,
            format_version: header.format_version,
            meta: header.meta,
            blocks,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }

    /// Load and check the `kind` tag.
    pub fn load_kind(path: impl AsRef<Path>, kind: &str) -> Result<Self> {
        let c = Self::load(path)?;
        if c.kind != kind {
            return Err(Error::Format(format!("expected a `{kind}` file, found `{}`", c.kind)));
        }
        Ok(c)
    }
}
