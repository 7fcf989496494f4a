//! Versioned little-endian container used for every file exchanged between
//! the main process and the workers.
//!
//! Layout: 8-byte magic, `u32` version, `u32` section count, a table of
//! `(u32 tag, u32 reserved, u64 offset, u64 length)` entries, the section
//! payloads, and a SHA-256 digest of everything before it.

use std::collections::BTreeMap;

use faer::Mat;
use sha2::{Digest, Sha256};

use crate::fem::CsrMatrix;

pub const FORMAT_VERSION: u32 = 1;
const HEADER: usize = 16;
const ENTRY: usize = 24;
const DIGEST: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    Magic { expected: String },
    #[error("format version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch")]
    Checksum,
    #[error("truncated data while reading {0}")]
    Truncated(&'static str),
    #[error("missing section {0}")]
    MissingSection(u32),
    #[error("invalid content: {0}")]
    Invalid(String),
}

/// Serializes tagged sections into a checksummed container.
pub fn write_container(magic: &[u8; 8], sections: &[(u32, Vec<u8>)]) -> Vec<u8> {
    let payload: usize = sections.iter().map(|(_, s)| s.len()).sum();
    let mut out = Vec::with_capacity(HEADER + ENTRY * sections.len() + payload + DIGEST);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    let mut offset = (HEADER + ENTRY * sections.len()) as u64;
    for (tag, data) in sections {
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(data.len() as u64).to_le_bytes());
        offset += data.len() as u64;
    }
    for (_, data) in sections {
        out.extend_from_slice(data);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Validates magic, version and checksum and returns the sections by tag.
pub fn read_container<'a>(
    magic: &[u8; 8],
    bytes: &'a [u8],
) -> Result<BTreeMap<u32, &'a [u8]>, FormatError> {
    if bytes.len() < HEADER + DIGEST {
        return Err(FormatError::Truncated("header"));
    }
    if &bytes[..8] != magic {
        return Err(FormatError::Magic {
            expected: String::from_utf8_lossy(magic)
                .trim_end_matches('\0')
                .to_string(),
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
    if Sha256::digest(body).as_slice() != digest {
        return Err(FormatError::Checksum);
    }
    let mut header = Decoder::new(&body[8..HEADER]);
    let version = header.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = header.u32()? as usize;
    let table_end = HEADER + ENTRY * count;
    if body.len() < table_end {
        return Err(FormatError::Truncated("section table"));
    }
    let mut table = Decoder::new(&body[HEADER..table_end]);
    let mut sections = BTreeMap::new();
    for _ in 0..count {
        let tag = table.u32()?;
        let _reserved = table.u32()?;
        let offset = table.u64()? as usize;
        let len = table.u64()? as usize;
        let end = offset
            .checked_add(len)
            .ok_or(FormatError::Truncated("section"))?;
        if offset < table_end || end > body.len() {
            return Err(FormatError::Truncated("section"));
        }
        if sections.insert(tag, &body[offset..end]).is_some() {
            return Err(FormatError::Invalid(format!("duplicate section {tag}")));
        }
    }
    Ok(sections)
}

pub fn section<'a>(
    sections: &BTreeMap<u32, &'a [u8]>,
    tag: u32,
) -> Result<Decoder<'a>, FormatError> {
    sections
        .get(&tag)
        .map(|s| Decoder::new(s))
        .ok_or(FormatError::MissingSection(tag))
}

#[derive(Default)]
pub struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn usize(&mut self, v: usize) -> &mut Self {
        self.u64(v as u64)
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn usizes(&mut self, v: &[usize]) -> &mut Self {
        self.usize(v.len());
        for &x in v {
            self.usize(x);
        }
        self
    }

    /// Column-major dense matrix with its shape.
    pub fn mat(&mut self, m: &Mat<f64>) -> &mut Self {
        self.usize(m.nrows()).usize(m.ncols());
        for j in 0..m.ncols() {
            for &x in m.col_as_slice(j) {
                self.f64(x);
            }
        }
        self
    }

    pub fn csr(&mut self, a: &CsrMatrix) -> &mut Self {
        self.usize(a.nrows)
            .usize(a.ncols)
            .usizes(&a.indptr)
            .usizes(&a.indices)
            .f64s(&a.values)
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(FormatError::Truncated(what))?;
        if end > self.data.len() {
            return Err(FormatError::Truncated(what));
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1, "u8")?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, "u32")?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, "u64")?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize, FormatError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| FormatError::Invalid(format!("index {v} out of range")))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8, "f64")?.try_into().unwrap()))
    }

    /// Length prefix checked against the remaining bytes before allocating.
    fn len(&mut self, item: usize, what: &'static str) -> Result<usize, FormatError> {
        let n = self.usize()?;
        if n.checked_mul(item)
            .is_none_or(|b| b > self.data.len() - self.pos)
        {
            return Err(FormatError::Truncated(what));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, FormatError> {
        let n = self.len(8, "f64 array")?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>, FormatError> {
        let n = self.len(8, "index array")?;
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn mat(&mut self) -> Result<Mat<f64>, FormatError> {
        let r = self.usize()?;
        let c = self.usize()?;
        let total = r.checked_mul(c).ok_or(FormatError::Truncated("matrix"))?;
        if total
            .checked_mul(8)
            .is_none_or(|b| b > self.data.len() - self.pos)
        {
            return Err(FormatError::Truncated("matrix"));
        }
        let mut m = Mat::<f64>::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }

    pub fn csr(&mut self) -> Result<CsrMatrix, FormatError> {
        let nrows = self.usize()?;
        let ncols = self.usize()?;
        let indptr = self.usizes()?;
        let indices = self.usizes()?;
        let values = self.f64s()?;
        let valid = indptr.len() == nrows + 1
            && indptr.first() == Some(&0)
            && indptr.windows(2).all(|w| w[0] <= w[1])
            && indptr.last() == Some(&indices.len())
            && indices.len() == values.len()
            && indices.iter().all(|&c| c < ncols);
        if !valid {
            return Err(FormatError::Invalid("inconsistent sparse matrix".into()));
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"NDDTEST\0";

    fn sample() -> Vec<u8> {
        let mut e = Encoder::new();
        e.u32(7).f64s(&[1.5, -2.0]).usizes(&[3, 4, 5]);
        let a = e.finish();
        let m = Mat::<f64>::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        let b = Encoder::new().mat(&m).finish();
        write_container(MAGIC, &[(1, a), (2, b)])
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let s = read_container(MAGIC, &bytes).unwrap();
        let mut a = section(&s, 1).unwrap();
        assert_eq!(a.u32().unwrap(), 7);
        assert_eq!(a.f64s().unwrap(), vec![1.5, -2.0]);
        assert_eq!(a.usizes().unwrap(), vec![3, 4, 5]);
        assert!(a.is_empty());
        let m = section(&s, 2).unwrap().mat().unwrap();
        assert_eq!(m[(1, 2)], 5.0);
        assert!(matches!(
            section(&s, 3),
            Err(FormatError::MissingSection(3))
        ));
    }

    #[test]
    fn tampering_is_detected() {
        let mut bytes = sample();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(
            read_container(MAGIC, &bytes),
            Err(FormatError::Checksum)
        ));
        let bytes = sample();
        assert!(matches!(
            read_container(b"NDDOTHR\0", &bytes),
            Err(FormatError::Magic { .. })
        ));
        assert!(matches!(
            read_container(MAGIC, &bytes[..bytes.len() - 1]),
            Err(FormatError::Checksum)
        ));
        assert!(matches!(
            read_container(MAGIC, &bytes[..10]),
            Err(FormatError::Truncated(_))
        ));
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = sample();
        bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        let n = bytes.len() - DIGEST;
        let digest = Sha256::digest(&bytes[..n]);
        bytes[n..].copy_from_slice(&digest);
        assert!(matches!(
            read_container(MAGIC, &bytes),
            Err(FormatError::Version { .. })
        ));
    }

    #[test]
    fn oversized_lengths_are_rejected() {
        let mut e = Encoder::new();
        e.usize(usize::MAX / 4);
        let data = e.finish();
        assert!(matches!(
            Decoder::new(&data).f64s(),
            Err(FormatError::Truncated(_))
        ));
    }
}
