// SPDX-License-Identifier: Apache-2.0

//! Self-describing little-endian binary files for null tables, asymptotes
//! and correction surfaces.
//!
//! Every file starts with an 8-byte magic and a `u32` format version. Files
//! carry no timestamps, so identical inputs give byte-identical files.

use cubegof_core::limits::CorrectionSurface;
use cubegof_core::null::{GaussianAsymptote, NullComponent, TableKind, TabulatedNull};
use cubegof_core::TestId;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const TABLE_MAGIC: &[u8; 8] = b"CGOFTAB\0";
pub const ASYMPTOTE_MAGIC: &[u8; 8] = b"CGOFASY\0";
pub const SURFACE_MAGIC: &[u8; 8] = b"CGOFSRF\0";

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(magic: &[u8; 8]) -> Self {
        let mut w = Self(magic.to_vec());
        w.u32(FORMAT_VERSION);
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        let mut r = Self { buf, pos: 0 };
        if r.take(8)? != magic {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        Ok(r)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(Error::Format("implausible length".into()));
        }
        Ok(n)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(())
    }
}

fn test_from(code: u8) -> Result<TestId> {
    TestId::from_code(code).ok_or_else(|| Error::Format(format!("unknown test code {code}")))
}

/// Header fields of a table file, readable without decoding the knots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableHeader {
    pub kind: TableKind,
    pub test: TestId,
    pub m: u64,
    pub trials: u64,
    pub seed: u64,
    pub components: u32,
}

pub fn encode_table(t: &TabulatedNull) -> Vec<u8> {
    let mut w = Writer::header(TABLE_MAGIC);
    w.u8(t.kind.code());
    w.u8(t.test.code());
    w.u64(t.m as u64);
    w.u64(t.trials);
    w.u64(t.seed);
    w.u32(t.components().len() as u32);
    for c in t.components() {
        w.u32(c.index() as u32);
        w.f64(c.mean());
        w.f64(c.sd());
        w.u32(c.knots().len() as u32);
        w.f64s(c.knots());
        w.f64s(c.cdf_values());
    }
    w.0
}

fn read_table_header(r: &mut Reader<'_>) -> Result<TableHeader> {
    let kind = r.u8()?;
    let kind = TableKind::from_code(kind).ok_or_else(|| Error::Format(format!("unknown table kind {kind}")))?;
    Ok(TableHeader {
        kind,
        test: test_from(r.u8()?)?,
        m: r.u64()?,
        trials: r.u64()?,
        seed: r.u64()?,
        components: r.u32()?,
    })
}

pub fn table_header(buf: &[u8]) -> Result<TableHeader> {
    read_table_header(&mut Reader::open(buf, TABLE_MAGIC)?)
}

pub fn decode_table(buf: &[u8]) -> Result<TabulatedNull> {
    let mut r = Reader::open(buf, TABLE_MAGIC)?;
    let h = read_table_header(&mut r)?;
    let mut comps = Vec::with_capacity(h.components as usize);
    for _ in 0..h.components {
        let index = r.u32()? as usize;
        let mean = r.f64()?;
        let sd = r.f64()?;
        let k = r.len()?;
        let knots = r.f64s(k)?;
        let cdf = r.f64s(k)?;
        comps.push(NullComponent::new(index, mean, sd, knots, cdf)?);
    }
    r.finish()?;
    Ok(TabulatedNull::from_parts(h.kind, h.test, h.m as usize, h.trials, h.seed, comps)?)
}

pub fn encode_asymptote(a: &GaussianAsymptote) -> Vec<u8> {
    let mut w = Writer::header(ASYMPTOTE_MAGIC);
    w.u8(a.test.code());
    w.u64(a.trials);
    w.u64(a.seed);
    let (m, mean, sd) = a.grid();
    w.u32(m.len() as u32);
    for &x in m {
        w.u64(x as u64);
    }
    w.f64s(mean);
    w.f64s(sd);
    w.0
}

pub fn decode_asymptote(buf: &[u8]) -> Result<GaussianAsymptote> {
    let mut r = Reader::open(buf, ASYMPTOTE_MAGIC)?;
    let test = test_from(r.u8()?)?;
    let trials = r.u64()?;
    let seed = r.u64()?;
    let k = r.len()?;
    let m = (0..k).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mean = r.f64s(k)?;
    let sd = r.f64s(k)?;
    r.finish()?;
    Ok(GaussianAsymptote::from_parts(test, trials, seed, m, mean, sd)?)
}

pub fn encode_surface(s: &CorrectionSurface) -> Vec<u8> {
    let mut w = Writer::header(SURFACE_MAGIC);
    w.u8(s.test.code());
    w.u32(s.n as u32);
    w.u64(s.trials);
    w.u64(s.seed);
    w.u32(s.mu_grid().len() as u32);
    w.u32(s.c1_grid().len() as u32);
    w.f64s(s.mu_grid());
    w.f64s(s.c1_grid());
    w.f64s(s.raw());
    w.0
}

pub fn decode_surface(buf: &[u8]) -> Result<CorrectionSurface> {
    let mut r = Reader::open(buf, SURFACE_MAGIC)?;
    let test = test_from(r.u8()?)?;
    let n = r.u32()? as usize;
    let trials = r.u64()?;
    let seed = r.u64()?;
    let nm = r.len()?;
    let nc = r.len()?;
    let mu = r.f64s(nm)?;
    let c1 = r.f64s(nc)?;
    let raw = r.f64s(nm * nc)?;
    r.finish()?;
    Ok(CorrectionSurface::from_parts(n, test, trials, seed, mu, c1, raw)?)
}
