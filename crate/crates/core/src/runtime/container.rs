//! `MWVC` weight container.
//!
//! Layout, little-endian throughout:
//! `"MWVC" | u32 version | u32 meta_len | meta JSON | u64 payload_len | payload | u32 crc32(payload)`.
//! The JSON holds the architecture config and a tensor directory with name,
//! shape, encoding, byte offset and byte length of every tensor.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{ContainerError, Error, Result};
use crate::nn::{BlockSparse, Matrix, SparseMatrix};

pub const MAGIC: &[u8; 4] = b"MWVC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Dense(Matrix),
    Csr(SparseMatrix),
    /// Stored as the CSR expansion of its blocks.
    Block(BlockSparse),
}

impl Tensor {
    pub fn shape(&self) -> [usize; 2] {
        match self {
            Tensor::Dense(m) => [m.rows, m.cols],
            Tensor::Csr(m) => [m.rows(), m.cols()],
            Tensor::Block(m) => [m.rows(), m.cols()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    F32,
    Csr,
    Block16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub encoding: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnz: Option<usize>,
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

fn put_u32s(out: &mut Vec<u8>, v: impl IntoIterator<Item = u32>) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_csr(out: &mut Vec<u8>, m: &SparseMatrix) {
    put_u32s(out, m.row_offsets().iter().copied());
    put_u32s(out, m.col_indices().iter().copied());
    put_f32s(out, m.values());
}

/// Serialises a config and named tensors.
pub fn write_container(config: &serde_json::Value, tensors: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    let mut seen = HashSet::new();
    for (name, t) in tensors {
        if !seen.insert(name.as_str()) {
            return Err(ContainerError::DuplicateTensor(name.clone()).into());
        }
        let offset = payload.len() as u64;
        let (encoding, nnz) = match t {
            Tensor::Dense(m) => {
                put_f32s(&mut payload, &m.data);
                (Encoding::F32, None)
            }
            Tensor::Csr(m) => {
                put_csr(&mut payload, m);
                (Encoding::Csr, Some(m.nnz()))
            }
            Tensor::Block(b) => {
                let m = b.to_csr();
                put_csr(&mut payload, &m);
                (Encoding::Block16, Some(m.nnz()))
            }
        };
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape(),
            encoding,
            nnz,
            offset,
            len: payload.len() as u64 - offset,
        });
    }
    let meta = serde_json::to_vec(&Meta {
        config: config.clone(),
        tensors: entries,
    })?;
    let mut out = Vec::with_capacity(payload.len() + meta.len() + 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(e) => {
                let s = &self.buf[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(ContainerError::Truncated(format!(
                "{what} needs {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))
            .into()),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    ContainerError::Malformed(msg.into()).into()
}

fn u32s(b: &[u8]) -> Vec<u32> {
    b.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()
}

fn f32s(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

fn decode(e: &TensorEntry, bytes: &[u8]) -> Result<Tensor> {
    let [rows, cols] = e.shape;
    let bad = |m: String| malformed(format!("tensor {:?}: {m}", e.name));
    match e.encoding {
        Encoding::F32 => {
            let want = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
            if want != Some(bytes.len()) {
                return Err(bad(format!("{} bytes for a {rows}x{cols} dense tensor", bytes.len())));
            }
            Ok(Tensor::Dense(Matrix::from_vec(rows, cols, f32s(bytes))?))
        }
        Encoding::Csr | Encoding::Block16 => {
            let nnz = e.nnz.ok_or_else(|| bad("sparse tensor without nnz".into()))?;
            let want = rows
                .checked_add(1)
                .and_then(|r| r.checked_add(nnz.checked_mul(2)?))
                .and_then(|n| n.checked_mul(4));
            if want != Some(bytes.len()) {
                return Err(bad(format!("{} bytes for {rows} rows and {nnz} entries", bytes.len())));
            }
            let (off, rest) = bytes.split_at((rows + 1) * 4);
            let (idx, val) = rest.split_at(nnz * 4);
            let m = SparseMatrix::from_parts(rows, cols, u32s(off), u32s(idx), f32s(val))
                .map_err(|err| bad(err.to_string()))?;
            if e.encoding == Encoding::Csr {
                Ok(Tensor::Csr(m))
            } else {
                Ok(Tensor::Block(BlockSparse::from_csr(&m).map_err(|err| bad(err.to_string()))?))
            }
        }
    }
}

/// Parses and verifies a container. Tensors come back in directory order.
pub fn read_container(buf: &[u8]) -> Result<(serde_json::Value, Vec<(String, Tensor)>)> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic(magic).into());
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(ContainerError::UnsupportedVersion(version).into());
    }
    let meta_len = r.u32("metadata length")? as usize;
    let meta_bytes = r.take(meta_len, "metadata")?;
    let payload_len = r.u64("payload length")?;
    let payload_len = usize::try_from(payload_len).map_err(|_| malformed("payload length overflows"))?;
    let payload = r.take(payload_len, "payload")?;
    let stored = r.u32("checksum")?;
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(ContainerError::Crc { stored, computed }.into());
    }
    if r.pos != buf.len() {
        return Err(malformed(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    let meta: Meta = serde_json::from_slice(meta_bytes).map_err(|e| malformed(format!("metadata: {e}")))?;

    let mut seen = HashSet::new();
    let mut end = 0u64;
    let mut tensors = Vec::with_capacity(meta.tensors.len());
    for (i, e) in meta.tensors.iter().enumerate() {
        if !seen.insert(e.name.as_str()) {
            return Err(ContainerError::DuplicateTensor(e.name.clone()).into());
        }
        if i > 0 && e.offset <= meta.tensors[i - 1].offset {
            return Err(malformed(format!("tensor {:?}: offsets not strictly increasing", e.name)));
        }
        if e.offset < end {
            return Err(malformed(format!("tensor {:?} overlaps its predecessor", e.name)));
        }
        end = e
            .offset
            .checked_add(e.len)
            .filter(|&x| x <= payload_len as u64)
            .ok_or_else(|| malformed(format!("tensor {:?} extends past the payload", e.name)))?;
        let bytes = &payload[e.offset as usize..end as usize];
        tensors.push((e.name.clone(), decode(e, bytes)?));
    }
    Ok((meta.config, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sparsify;
    use crate::rng::RngStream;

    fn sample() -> Vec<(String, Tensor)> {
        let mut rng = RngStream::with_stream_id(1, 0);
        let dense = Matrix::random(32, 20, 1.0, &mut rng);
        vec![
            ("a".into(), Tensor::Dense(Matrix::random(3, 4, 1.0, &mut rng))),
            ("b".into(), Tensor::Csr(sparsify(&dense, 0.3).unwrap())),
            ("c".into(), Tensor::Block(BlockSparse::prune(&dense, 0.4).unwrap())),
        ]
    }

    fn bytes() -> Vec<u8> {
        write_container(&serde_json::json!({"k": 1}), &sample()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (cfg, t) = read_container(&bytes()).unwrap();
        assert_eq!(cfg["k"], 1);
        assert_eq!(t, sample());
    }

    #[test]
    fn every_truncation_is_an_error() {
        let b = bytes();
        for n in 0..b.len() {
            assert!(read_container(&b[..n]).is_err(), "prefix {n}");
        }
    }

    #[test]
    fn corruption_is_detected() {
        let b = bytes();
        let meta_len = u32::from_le_bytes(b[8..12].try_into().unwrap()) as usize;
        let mut c = b.clone();
        c[12 + meta_len + 8 + 5] ^= 0x40;
        assert!(matches!(read_container(&c), Err(Error::Container(ContainerError::Crc { .. }))));
        let mut m = b.clone();
        m[0] = b'X';
        assert!(matches!(read_container(&m), Err(Error::Container(ContainerError::BadMagic(_)))));
        let mut v = b.clone();
        v[4] = 9;
        assert!(matches!(
            read_container(&v),
            Err(Error::Container(ContainerError::UnsupportedVersion(9)))
        ));
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut t = sample();
        t.push(t[0].clone());
        assert!(matches!(
            write_container(&serde_json::Value::Null, &t),
            Err(Error::Container(ContainerError::DuplicateTensor(_)))
        ));
    }

    #[test]
    fn overlapping_directory_is_malformed() {
        let t = sample();
        let b = write_container(&serde_json::Value::Null, &t).unwrap();
        let meta_len = u32::from_le_bytes(b[8..12].try_into().unwrap()) as usize;
        let mut meta: Meta = serde_json::from_slice(&b[12..12 + meta_len]).unwrap();
        meta.tensors[1].offset -= 4;
        let meta = serde_json::to_vec(&meta).unwrap();
        let mut out = b[..8].to_vec();
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&b[12 + meta_len..]);
        assert!(matches!(read_container(&out), Err(Error::Container(ContainerError::Malformed(_)))));
    }
}
