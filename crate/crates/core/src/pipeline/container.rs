//! Self-describing binary container for model artifacts.
//!
//! ```text
//! magic        8 bytes   "SAELSTM1"
//! version      u32 LE
//! header_len   u64 LE
//! header       header_len bytes of UTF-8 JSON
//! block_count  u32 LE
//! block*       name_len u16 LE, name, rows u64 LE, cols u64 LE,
//!              rows*cols f64 LE in row-major order
//! digest       32 bytes  SHA-256 of everything above
//! ```
//!
//! Every length field is checked against the remaining bytes before it is
//! used, so a truncated file fails with an integrity error naming the part
//! that was cut off.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 8] = b"SAELSTM1";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub data: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: serde_json::Value,
    pub blocks: Vec<Block>,
}

impl Container {
    pub fn new(header: serde_json::Value) -> Self {
        Container {
            header,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, data: Matrix) {
        self.blocks.push(Block {
            name: name.into(),
            data,
        });
    }

    pub fn push_vec(&mut self, name: impl Into<String>, v: &[f64]) {
        let m = Matrix::from_vec(1, v.len(), v.to_vec()).expect("row vector");
        self.push(name, m);
    }

    /// Removes and returns the named block.
    pub fn take(&mut self, name: &str) -> Result<Matrix> {
        let i = self
            .blocks
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| Error::Integrity {
                block: name.to_string(),
                msg: "block missing".into(),
            })?;
        Ok(self.blocks.remove(i).data)
    }

    /// Removes the named block and checks its shape.
    pub fn take_shaped(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let m = self.take(name)?;
        if m.shape() != (rows, cols) {
            return Err(Error::Integrity {
                block: name.to_string(),
                msg: format!("expected {rows}x{cols}, found {}x{}", m.rows(), m.cols()),
            });
        }
        Ok(m)
    }

    pub fn take_vec(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self.take_shaped(name, 1, len)?.as_slice().to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.extend_from_slice(&(b.data.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(b.data.cols() as u64).to_le_bytes());
            for x in b.data.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let n = MAGIC.len().min(bytes.len());
        if bytes[..n] != MAGIC[..n] {
            return Err(Error::Format("bad magic bytes; not a saelstm artifact".into()));
        }
        let mut r = Reader { bytes, pos: 0 };
        r.take(MAGIC.len(), "magic")?;
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let header_len = r.len_u64("header")?;
        let header_bytes = r.take(header_len, "header")?;
        let header: serde_json::Value =
            serde_json::from_slice(header_bytes).map_err(|e| Error::Integrity {
                block: "header".into(),
                msg: format!("malformed json: {e}"),
            })?;
        let count = r.u32("block table")? as usize;
        let mut blocks = Vec::with_capacity(count.min(64));
        for i in 0..count {
            let label = format!("block #{i}");
            let name_len = r.u16(&label)? as usize;
            let name = std::str::from_utf8(r.take(name_len, &label)?)
                .map_err(|_| Error::Integrity {
                    block: label.clone(),
                    msg: "name is not utf-8".into(),
                })?
                .to_string();
            let rows = r.len_u64(&name)?;
            let cols = r.len_u64(&name)?;
            let nbytes = rows
                .checked_mul(cols)
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| Error::Integrity {
                    block: name.clone(),
                    msg: format!("dimensions {rows}x{cols} overflow"),
                })?;
            let raw = r.take(nbytes, &name)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let data = Matrix::from_vec(rows, cols, data)?;
            blocks.push(Block { name, data });
        }
        let body_end = r.pos;
        let digest = r.take(DIGEST_LEN, "digest")?;
        if Sha256::digest(&bytes[..body_end]).as_slice() != digest {
            return Err(Error::Integrity {
                block: "digest".into(),
                msg: "checksum mismatch; file is corrupted".into(),
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Integrity {
                block: "trailer".into(),
                msg: format!("{} unexpected bytes after the digest", bytes.len() - r.pos),
            });
        }
        Ok(Container { header, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, block: &str) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(Error::Integrity {
                block: block.to_string(),
                msg: format!("truncated: need {n} bytes at offset {}, {left} remain", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, block: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, block)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, block: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, block)?.try_into().expect("4 bytes")))
    }

    fn len_u64(&mut self, block: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8, block)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Integrity {
            block: block.to_string(),
            msg: format!("length {v} does not fit in memory"),
        })
    }
}
