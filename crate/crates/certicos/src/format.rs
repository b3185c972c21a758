//! On-disk formats.
//!
//! C2VD holds a vector set:
//!
//! ```text
//! "C2VD" | u32 version | u64 n | u32 d | n*d f32
//! ```
//!
//! C2IX holds a graph and its seeder, followed by a CRC-64/XZ of every
//! preceding byte:
//!
//! ```text
//! "C2IX" | u32 version | u64 n | u32 d | u32 K | n*K u32 adjacency | n f32 radii
//!        | u32 m | u64 rng_seed | m*d f32 planes
//!        | u32 buckets | buckets * (u32 code, u32 len, len * u32 ids)
//!        | u64 crc
//! ```
//!
//! Everything is little-endian with no padding.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use certicos_core::{KnnGraph, LshSeeder, UnitVectorSet};
use crc::{Crc, CRC_64_XZ};
use thiserror::Error;

pub const VECTORS_MAGIC: &[u8; 4] = b"C2VD";
pub const INDEX_MAGIC: &[u8; 4] = b"C2IX";
pub const VERSION: u32 = 1;

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    Magic { expected: String, found: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("file truncated: {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("invalid data: {0}")]
    Data(#[from] certicos_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(FormatError::Truncated(what))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Reads `count` 4-byte words, checking the length before allocating.
    fn words<T>(&mut self, count: usize, what: &'static str, f: fn([u8; 4]) -> T) -> Result<Vec<T>> {
        let len = count.checked_mul(4).ok_or(FormatError::Truncated(what))?;
        let raw = self.take(len, what)?;
        Ok(raw.chunks_exact(4).map(|c| f(c.try_into().unwrap())).collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(FormatError::Magic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(FormatError::Version(version));
        }
        Ok(())
    }
}

fn usize_of(x: u64, what: &'static str) -> Result<usize> {
    usize::try_from(x).map_err(|_| FormatError::Truncated(what))
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, xs: &[f32]) {
    out.reserve(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_u32s(out: &mut Vec<u8>, xs: &[u32]) {
    out.reserve(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Raw C2VD contents before any unit-norm validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVectors {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f32>,
}

pub fn decode_vectors(bytes: &[u8]) -> Result<RawVectors> {
    let mut r = Reader::new(bytes);
    r.magic(VECTORS_MAGIC)?;
    let n = usize_of(r.u64("header")?, "header")?;
    let d = r.u32("header")? as usize;
    let count = n.checked_mul(d).ok_or(FormatError::Truncated("vector data"))?;
    let data = r.words(count, "vector data", f32::from_le_bytes)?;
    if r.remaining() > 0 {
        return Err(FormatError::Trailing(r.remaining()));
    }
    Ok(RawVectors { n, d, data })
}

pub fn encode_vectors(d: usize, data: &[f32]) -> Vec<u8> {
    let n = if d == 0 { 0 } else { data.len() / d };
    let mut out = Vec::with_capacity(20 + data.len() * 4);
    out.extend_from_slice(VECTORS_MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, n as u64);
    put_u32(&mut out, d as u32);
    put_f32s(&mut out, data);
    out
}

/// Reads a C2VD file, normalizing rows when `normalize` is set. Without it
/// rows must already be unit within the accepted tolerance.
pub fn load_vectors(path: &Path, normalize: bool) -> Result<UnitVectorSet> {
    let raw = read_raw_vectors(path)?;
    Ok(UnitVectorSet::from_rows(raw.d, raw.data, normalize)?)
}

pub fn read_raw_vectors(path: &Path) -> Result<RawVectors> {
    decode_vectors(&fs::read(path)?)
}

pub fn save_vectors(path: &Path, d: usize, data: &[f32]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_vectors(d, data))?;
    w.flush()?;
    Ok(())
}

pub fn encode_index(graph: &KnnGraph, seeder: &LshSeeder) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(INDEX_MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, graph.len() as u64);
    put_u32(&mut out, seeder.dim() as u32);
    put_u32(&mut out, graph.degree() as u32);
    put_u32s(&mut out, graph.adjacency());
    put_f32s(&mut out, graph.radii());

    put_u32(&mut out, seeder.bits() as u32);
    put_u64(&mut out, seeder.rng_seed());
    put_f32s(&mut out, seeder.planes());
    put_u32(&mut out, seeder.buckets().count() as u32);
    for (code, ids) in seeder.buckets() {
        put_u32(&mut out, code);
        put_u32(&mut out, ids.len() as u32);
        put_u32s(&mut out, ids);
    }

    let crc = CHECKSUM.checksum(&out);
    put_u64(&mut out, crc);
    out
}

pub fn decode_index(bytes: &[u8]) -> Result<(KnnGraph, LshSeeder)> {
    let mut r = Reader::new(bytes);
    r.magic(INDEX_MAGIC)?;
    let n = usize_of(r.u64("header")?, "header")?;
    let d = r.u32("header")? as usize;
    let k = r.u32("header")? as usize;
    let adjacency = r.words(n.saturating_mul(k), "adjacency", u32::from_le_bytes)?;
    let radii = r.words(n, "radii", f32::from_le_bytes)?;

    let m = r.u32("seeder header")? as usize;
    let rng_seed = r.u64("seeder header")?;
    let planes = r.words(m.saturating_mul(d), "planes", f32::from_le_bytes)?;
    let buckets = r.u32("bucket count")?;
    let mut table = BTreeMap::new();
    for _ in 0..buckets {
        let code = r.u32("bucket")?;
        let len = r.u32("bucket")? as usize;
        let ids = r.words(len, "bucket", u32::from_le_bytes)?;
        if table.insert(code, ids).is_some() {
            return Err(certicos_core::Error::Inconsistent("duplicate bucket code").into());
        }
    }

    let payload = r.pos;
    let stored = r.u64("checksum")?;
    if r.remaining() > 0 {
        return Err(FormatError::Trailing(r.remaining()));
    }
    let computed = CHECKSUM.checksum(&bytes[..payload]);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }

    let graph = KnnGraph::from_parts(n, k, adjacency, radii)?;
    let seeder = LshSeeder::from_parts(d, m, rng_seed, planes, table, n)?;
    Ok((graph, seeder))
}

pub fn save_index(path: &Path, graph: &KnnGraph, seeder: &LshSeeder) -> Result<()> {
    fs::write(path, encode_index(graph, seeder))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<(KnnGraph, LshSeeder)> {
    decode_index(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use certicos_core::knng::build_knng;

    fn tiny() -> (UnitVectorSet, KnnGraph, LshSeeder) {
        let data = vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.6, 0.8];
        let set = UnitVectorSet::from_rows(2, data, false).unwrap();
        let graph = build_knng(&set, 2).unwrap();
        let seeder = LshSeeder::build(&set, 3, 11).unwrap();
        (set, graph, seeder)
    }

    #[test]
    fn vectors_layout_is_exact() {
        let bytes = encode_vectors(2, &[3.0, 4.0]);
        assert_eq!(&bytes[..4], b"C2VD");
        assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 8);
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &3.0f32.to_le_bytes());
        let raw = decode_vectors(&bytes).unwrap();
        assert_eq!(raw, RawVectors { n: 1, d: 2, data: vec![3.0, 4.0] });
    }

    #[test]
    fn vectors_errors() {
        let mut bytes = encode_vectors(2, &[3.0, 4.0]);
        assert!(matches!(decode_vectors(&bytes[..bytes.len() - 1]), Err(FormatError::Truncated(_))));
        assert!(matches!(decode_vectors(&bytes[..6]), Err(FormatError::Truncated(_))));
        bytes.push(0);
        assert!(matches!(decode_vectors(&bytes), Err(FormatError::Trailing(1))));
        bytes[0] = b'X';
        assert!(matches!(decode_vectors(&bytes), Err(FormatError::Magic { .. })));
        let mut v2 = encode_vectors(2, &[3.0, 4.0]);
        v2[4] = 2;
        assert!(matches!(decode_vectors(&v2), Err(FormatError::Version(2))));
    }

    #[test]
    fn huge_header_does_not_allocate() {
        let mut bytes = encode_vectors(2, &[1.0, 0.0]);
        bytes[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_vectors(&bytes), Err(FormatError::Truncated(_))));
    }

    #[test]
    fn index_round_trip() {
        let (_, graph, seeder) = tiny();
        let bytes = encode_index(&graph, &seeder);
        let (g2, s2) = decode_index(&bytes).unwrap();
        assert_eq!(g2, graph);
        assert_eq!(s2, seeder);
        assert_eq!(encode_index(&g2, &s2), bytes);
    }

    #[test]
    fn index_rejects_damage() {
        let (_, graph, seeder) = tiny();
        let bytes = encode_index(&graph, &seeder);
        for cut in [3, 10, 30, bytes.len() - 9, bytes.len() - 1] {
            assert!(matches!(decode_index(&bytes[..cut]), Err(FormatError::Truncated(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[30] ^= 1;
        assert!(matches!(decode_index(&flipped), Err(FormatError::Checksum { .. })));
        let mut magic = bytes.clone();
        magic[..4].copy_from_slice(b"C2VD");
        assert!(matches!(decode_index(&magic), Err(FormatError::Magic { .. })));
    }

    #[test]
    fn checksum_is_crc64_xz() {
        // standard check value for "123456789"
        assert_eq!(CHECKSUM.checksum(b"123456789"), 0x995d_c9bb_df19_39fa);
    }
}
