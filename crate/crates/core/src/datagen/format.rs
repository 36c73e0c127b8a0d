//! MCLS layout (all integers little-endian):
//!
//! ```text
//! "MCLS" | version u32 | n u64
//! n × (u32 byte length, UTF-8 name)
//! P × f32 shape | P × f32 color          P = n(n−1)/2
//! u32 length, JSON meta
//! u32 CRC32 of every preceding byte
//! ```

use std::io::Write;
use std::path::Path;

use super::{pair_count, pair_from_index, DataError, MatrixMeta, PairMatrix};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"MCLS";

pub fn matrix_to_bytes(m: &PairMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n() as u64).to_le_bytes());
    for name in &m.names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for v in m.shape.iter().chain(&m.color) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let meta = serde_json::to_vec(&m.meta).expect("meta serializes");
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], DataError> {
        if self.buf.len() - self.pos < k {
            return Err(DataError::Format(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, k: usize) -> Result<Vec<f32>, DataError> {
        let bytes = self.take(k.checked_mul(4).ok_or_else(|| DataError::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses an MCLS buffer; the checksum is verified before anything else.
pub fn matrix_from_bytes(bytes: &[u8]) -> Result<PairMatrix, DataError> {
    if bytes.len() < 4 {
        return Err(DataError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(DataError::ChecksumMismatch);
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DataError::VersionUnsupported(version));
    }
    let n = r.u64()?;
    let mut names = Vec::new();
    for _ in 0..n {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|e| DataError::Format(format!("name not UTF-8: {e}")))?;
        names.push(s.to_string());
    }
    let p = pair_count(n) as usize;
    let shape = r.f32s(p)?;
    let color = r.f32s(p)?;
    let len = r.u32()? as usize;
    let meta: MatrixMeta =
        serde_json::from_slice(r.take(len)?).map_err(|e| DataError::Format(format!("meta JSON: {e}")))?;
    if r.pos != body.len() {
        return Err(DataError::Format("trailing bytes after meta block".into()));
    }
    PairMatrix::new(names, shape, color, meta)
}

pub fn save_matrix(m: &PairMatrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    std::fs::write(path, matrix_to_bytes(m))?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<PairMatrix, DataError> {
    matrix_from_bytes(&std::fs::read(path)?)
}

/// CSV rows `i,j,name_i,name_j,shape,color` for every stored pair.
pub fn write_csv<W: Write>(m: &PairMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "i,j,name_i,name_j,shape,color")?;
    for idx in 0..m.shape.len() {
        let (i, j) = pair_from_index(idx, m.n());
        writeln!(
            out,
            "{i},{j},{},{},{},{}",
            m.names[i], m.names[j], m.shape[idx], m.color[idx]
        )?;
    }
    Ok(())
}
