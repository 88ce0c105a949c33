// SPDX-License-Identifier: Apache-2.0

//! Binary sketch file format, version 1. All integers little-endian.
//!
//! ```text
//! "DSK1"                  magic, 4 bytes
//! u16                     version (1)
//! u8                      scheme (0 regular, 1 aligned, 2 lsh)
//! u32                     d
//! scheme parameters       regular: f64 h
//!                         aligned: d x f64 widths
//!                         lsh:     u64 seed, d*d x f64 W (row-major),
//!                                  d x f64 b, f64 h
//! u64                     count-sketch seed
//! u32 K, u32 R, u8 recovery (0 mean, 1 median)
//! u64                     n
//! K*R x i64               counters, row-major
//! u32 H, u32 entry count
//! entries                 (d x i64 bin, f64 count), ascending bin-id
//! u32                     CRC-32 (IEEE) of every preceding byte
//! ```

use crate::countsketch::{CountSketch, Recovery};
use crate::error::{Error, Result};
use crate::partition::{BinId, LshPartition, Partitioner, Scheme};
use crate::sketch::DensitySketch;
use crate::topbins::TopBins;

pub const MAGIC: [u8; 4] = *b"DSK1";
pub const VERSION: u16 = 1;

pub fn to_bytes(ds: &DensitySketch) -> Vec<u8> {
    let p = ds.partitioner();
    let cs = ds.count_sketch();
    let heap = ds.heap();
    let d = p.dim();

    let mut out = Vec::with_capacity(64 + cs.counters().len() * 8 + heap.len() * (d + 1) * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(p.scheme().tag());
    put_u32(&mut out, d);
    match p {
        Partitioner::Regular { width, .. } => put_f64(&mut out, *width),
        Partitioner::Aligned { widths } => widths.iter().for_each(|&w| put_f64(&mut out, w)),
        Partitioner::Lsh(l) => {
            out.extend_from_slice(&l.seed().to_le_bytes());
            l.projection().iter().for_each(|&w| put_f64(&mut out, w));
            l.offsets().iter().for_each(|&b| put_f64(&mut out, b));
            put_f64(&mut out, l.width());
        }
    }
    out.extend_from_slice(&cs.seed().to_le_bytes());
    put_u32(&mut out, cs.repetitions());
    put_u32(&mut out, cs.range());
    out.push(cs.recovery().tag());
    out.extend_from_slice(&ds.len().to_le_bytes());
    for &c in cs.counters() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    put_u32(&mut out, heap.capacity());
    let entries = heap.entries();
    put_u32(&mut out, entries.len());
    for (b, c) in &entries {
        for &i in b.as_slice() {
            out.extend_from_slice(&i.to_le_bytes());
        }
        put_f64(&mut out, *c);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<DensitySketch> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            offset: 0,
            needed: 4 - bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut cur = Cursor { buf: bytes, pos: 4 };
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let raw = RawSketch::read(&mut cur)?;
    let body_end = cur.pos;
    let stored = cur.u32()?;
    if cur.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - cur.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    raw.build()
}

struct RawSketch {
    scheme: Scheme,
    dim: usize,
    widths: Vec<f64>,
    lsh: Option<(u64, Vec<f64>, Vec<f64>)>,
    cs_seed: u64,
    repetitions: usize,
    range: usize,
    recovery_tag: u8,
    n: u64,
    counters: Vec<i64>,
    capacity: usize,
    entries: Vec<(BinId, f64)>,
}

impl RawSketch {
    fn read(cur: &mut Cursor<'_>) -> Result<Self> {
        let tag = cur.u8()?;
        let scheme =
            Scheme::from_tag(tag).ok_or_else(|| Error::Malformed(format!("unknown scheme tag {tag}")))?;
        let dim = cur.u32()? as usize;
        if dim == 0 {
            return Err(Error::Malformed("dimension 0".into()));
        }
        let (widths, lsh) = match scheme {
            Scheme::Regular => (vec![cur.f64()?], None),
            Scheme::Aligned => (cur.f64s(dim)?, None),
            Scheme::Lsh => {
                let seed = cur.u64()?;
                let w = cur.f64s(dim.checked_mul(dim).ok_or_else(too_large)?)?;
                let b = cur.f64s(dim)?;
                let h = cur.f64()?;
                (vec![h], Some((seed, w, b)))
            }
        };
        let cs_seed = cur.u64()?;
        let repetitions = cur.u32()? as usize;
        let range = cur.u32()? as usize;
        let recovery_tag = cur.u8()?;
        let n = cur.u64()?;
        let counters = cur.i64s(repetitions.checked_mul(range).ok_or_else(too_large)?)?;
        let capacity = cur.u32()? as usize;
        let count = cur.u32()? as usize;
        let entry_bytes = (dim + 1).checked_mul(8).ok_or_else(too_large)?;
        cur.ensure(count.checked_mul(entry_bytes).ok_or_else(too_large)?)?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let bin = BinId::from(cur.i64s(dim)?);
            let c = cur.f64()?;
            entries.push((bin, c));
        }
        Ok(RawSketch {
            scheme,
            dim,
            widths,
            lsh,
            cs_seed,
            repetitions,
            range,
            recovery_tag,
            n,
            counters,
            capacity,
            entries,
        })
    }

    fn build(self) -> Result<DensitySketch> {
        let partitioner = match (self.scheme, self.lsh) {
            (Scheme::Regular, _) => Partitioner::regular(self.dim, self.widths[0])?,
            (Scheme::Aligned, _) => Partitioner::aligned(self.widths)?,
            (Scheme::Lsh, Some((seed, w, b))) => {
                Partitioner::Lsh(LshPartition::from_parts(self.dim, self.widths[0], seed, w, b)?)
            }
            (Scheme::Lsh, None) => unreachable!("lsh parameters are read with the scheme"),
        };
        let recovery = Recovery::from_tag(self.recovery_tag)
            .ok_or_else(|| Error::Malformed(format!("unknown recovery tag {}", self.recovery_tag)))?;
        let cs = CountSketch::from_counters(
            self.repetitions,
            self.range,
            self.cs_seed,
            recovery,
            self.counters,
        )?;
        if self.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Malformed("heap entries not in ascending bin-id order".into()));
        }
        let heap = TopBins::from_entries(self.capacity, self.entries)?;
        Ok(DensitySketch::from_parts(partitioner, cs, heap, self.n))
    }
}

fn too_large() -> Error {
    Error::Malformed("declared size overflows".into())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("value exceeds u32 field of the sketch format");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn ensure(&self, n: usize) -> Result<()> {
        let left = self.buf.len() - self.pos;
        if n > left {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n - left,
            });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.ensure(n)?;
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(too_large)?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn i64s(&mut self, n: usize) -> Result<Vec<i64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(too_large)?)?;
        Ok(raw.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

impl DensitySketch {
    /// Serialises to the versioned, checksummed sketch format.
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(self)
    }

    /// Parses a sketch. Nothing is returned unless the whole buffer is
    /// well-formed and the checksum matches.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        from_bytes(bytes)
    }
}
