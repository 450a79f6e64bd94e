//! `VCFT` feature files: a 16-byte header (magic, version, frames, dim, all
//! little-endian u32 after the magic) followed by row-major f32 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VCFT";
pub const VERSION: u32 = 1;

/// A `[frames x dim]` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        if rows.is_empty() {
            return Ok(Self { dim: 1, data: Vec::new() });
        }
        Self::new(dim, rows.concat())
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.frames() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::InvalidInput("feature file shorter than its header".into()))?;
        if &header[..4] != MAGIC {
            return Err(Error::InvalidInput("feature file lacks VCFT magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        if word(4) != VERSION {
            return Err(Error::InvalidInput(format!("unsupported VCFT version {}", word(4))));
        }
        let (frames, dim) = (word(8) as usize, word(12) as usize);
        if dim == 0 {
            return Err(Error::InvalidInput("VCFT dim is zero".into()));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let want = frames
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::InvalidInput("VCFT size overflow".into()))?;
        if bytes.len() != want {
            return Err(Error::InvalidInput(format!(
                "VCFT payload has {} bytes, header implies {want}",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self { dim, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|source| Error::File {
            path: path.into(),
            source,
        })?;
        self.write_to(&mut f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut f = std::fs::File::open(path).map_err(|source| Error::File {
            path: path.into(),
            source,
        })?;
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let m = FeatureMatrix::new(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"VCFT");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(FeatureMatrix::read_from(&mut bytes.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let m = FeatureMatrix::new(3, vec![0.5; 9]).unwrap();
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        bytes.pop();
        assert!(FeatureMatrix::read_from(&mut bytes.as_slice()).is_err());
    }
}
