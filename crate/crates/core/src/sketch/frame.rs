//! Framed binary encoding of sketch state.
//!
//! Layout: magic `EMSK`, format version (u16), sketch kind (u8), seed (u64),
//! shape fields, then the nonzero cells. All integers are little-endian.

use super::exact::ExactSum;
use super::ksparse::{Cell, KSparse};
use super::l0::{L0Estimator, L0Sampler};
use super::pstable::PStableSketch;
use crate::error::{Error, Result};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use std::io::{Cursor, Read};

const MAGIC: &[u8; 4] = b"EMSK";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    KSparse = 1,
    L0Sampler = 2,
    L0Estimator = 3,
    PStable = 4,
}

fn blob(e: std::io::Error) -> Error {
    Error::Blob(e.to_string())
}

fn header(out: &mut Vec<u8>, kind: Kind, seed: u64) {
    out.extend_from_slice(MAGIC);
    out.write_u16::<LE>(FORMAT_VERSION).unwrap();
    out.write_u8(kind as u8).unwrap();
    out.write_u64::<LE>(seed).unwrap();
}

fn read_header(c: &mut Cursor<&[u8]>, kind: Kind) -> Result<u64> {
    let mut magic = [0u8; 4];
    c.read_exact(&mut magic).map_err(blob)?;
    if &magic != MAGIC {
        return Err(Error::Blob("bad magic".into()));
    }
    let v = c.read_u16::<LE>().map_err(blob)?;
    if v != FORMAT_VERSION {
        return Err(Error::Blob(format!("unsupported version {v}")));
    }
    let k = c.read_u8().map_err(blob)?;
    if k != kind as u8 {
        return Err(Error::Blob(format!("expected sketch kind {}, found {k}", kind as u8)));
    }
    c.read_u64::<LE>().map_err(blob)
}

fn write_ksparse_body(out: &mut Vec<u8>, s: &KSparse) {
    out.write_u64::<LE>(s.k as u64).unwrap();
    out.write_u32::<LE>(s.rows as u32).unwrap();
    out.write_u32::<LE>(s.width as u32).unwrap();
    let cells = s.raw_cells();
    out.write_u32::<LE>(cells.len() as u32).unwrap();
    for (key, c) in cells {
        out.write_u32::<LE>(key).unwrap();
        out.write_i64::<LE>(c.count).unwrap();
        out.write_i128::<LE>(c.lo).unwrap();
        out.write_i128::<LE>(c.hi).unwrap();
        out.write_u64::<LE>(c.fp).unwrap();
    }
}

fn read_ksparse_body(c: &mut Cursor<&[u8]>, seed: u64) -> Result<KSparse> {
    let k = c.read_u64::<LE>().map_err(blob)? as usize;
    let rows = c.read_u32::<LE>().map_err(blob)? as usize;
    let width = c.read_u32::<LE>().map_err(blob)? as usize;
    let n = c.read_u32::<LE>().map_err(blob)? as usize;
    let mut cells = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let key = c.read_u32::<LE>().map_err(blob)?;
        if key as usize >= rows * width {
            return Err(Error::Blob("cell key outside the sketch shape".into()));
        }
        cells.push((
            key,
            Cell {
                count: c.read_i64::<LE>().map_err(blob)?,
                lo: c.read_i128::<LE>().map_err(blob)?,
                hi: c.read_i128::<LE>().map_err(blob)?,
                fp: c.read_u64::<LE>().map_err(blob)?,
            },
        ));
    }
    let mut s = KSparse::with_shape(k, rows, width, seed);
    s.set_raw_cells(cells);
    Ok(s)
}

fn write_levels(out: &mut Vec<u8>, levels: &[Option<KSparse>]) {
    out.write_u32::<LE>(levels.len() as u32).unwrap();
    for lvl in levels {
        match lvl {
            None => out.write_u8(0).unwrap(),
            Some(k) => {
                out.write_u8(1).unwrap();
                out.write_u64::<LE>(k.seed).unwrap();
                write_ksparse_body(out, k);
            }
        }
    }
}

fn read_levels(c: &mut Cursor<&[u8]>) -> Result<Vec<Option<KSparse>>> {
    let n = c.read_u32::<LE>().map_err(blob)? as usize;
    let mut v = Vec::with_capacity(n.min(128));
    for _ in 0..n {
        if c.read_u8().map_err(blob)? == 0 {
            v.push(None);
        } else {
            let seed = c.read_u64::<LE>().map_err(blob)?;
            v.push(Some(read_ksparse_body(c, seed)?));
        }
    }
    Ok(v)
}

fn finish(c: &Cursor<&[u8]>) -> Result<()> {
    if (c.position() as usize) != c.get_ref().len() {
        return Err(Error::Blob("trailing bytes".into()));
    }
    Ok(())
}

impl KSparse {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        header(&mut out, Kind::KSparse, self.seed);
        write_ksparse_body(&mut out, self);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let seed = read_header(&mut c, Kind::KSparse)?;
        let s = read_ksparse_body(&mut c, seed)?;
        finish(&c)?;
        Ok(s)
    }
}

impl L0Sampler {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        header(&mut out, Kind::L0Sampler, self.seed);
        out.write_u64::<LE>(self.s as u64).unwrap();
        out.write_f64::<LE>(self.fail).unwrap();
        write_levels(&mut out, &self.levels);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let seed = read_header(&mut c, Kind::L0Sampler)?;
        let s = c.read_u64::<LE>().map_err(blob)? as usize;
        let fail = c.read_f64::<LE>().map_err(blob)?;
        let mut out = L0Sampler::with_params(seed, s, fail);
        out.levels = read_levels(&mut c)?;
        finish(&c)?;
        Ok(out)
    }
}

impl L0Estimator {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        header(&mut out, Kind::L0Estimator, self.seed);
        out.write_f64::<LE>(self.eps0).unwrap();
        out.write_u32::<LE>(self.reps as u32).unwrap();
        for rep in &self.levels {
            write_levels(&mut out, rep);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let seed = read_header(&mut c, Kind::L0Estimator)?;
        let eps0 = c.read_f64::<LE>().map_err(blob)?;
        let reps = c.read_u32::<LE>().map_err(blob)? as usize;
        let mut out = L0Estimator::with_params(eps0, reps, seed);
        for r in 0..reps {
            out.levels[r] = read_levels(&mut c)?;
        }
        finish(&c)?;
        Ok(out)
    }
}

impl PStableSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        header(&mut out, Kind::PStable, self.seed);
        out.write_u64::<LE>(self.p_bits).unwrap();
        out.write_u32::<LE>(self.reps as u32).unwrap();
        for a in &self.acc {
            let b = a.to_bytes();
            out.write_u32::<LE>(b.len() as u32).unwrap();
            out.extend_from_slice(&b);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        let seed = read_header(&mut c, Kind::PStable)?;
        let p = f64::from_bits(c.read_u64::<LE>().map_err(blob)?);
        let reps = c.read_u32::<LE>().map_err(blob)? as usize;
        let mut out = PStableSketch::new(p, reps.max(1), seed)?;
        for r in 0..reps {
            let len = c.read_u32::<LE>().map_err(blob)? as usize;
            let mut b = vec![0u8; len];
            c.read_exact(&mut b).map_err(blob)?;
            out.acc[r] = ExactSum::from_bytes(&b);
        }
        finish(&c)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ksparse_round_trip_and_merge() {
        let mut a = KSparse::new(4, 1e-6, 3);
        let mut b = KSparse::new(4, 1e-6, 3);
        a.update(10, 2);
        b.update(99, -1);
        let a2 = KSparse::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a2, a);
        let mut m = KSparse::from_bytes(&b.to_bytes()).unwrap();
        m.merge(&a2).unwrap();
        assert_eq!(m.decode(), super::super::ksparse::Decoded::Sparse(vec![(10, 2), (99, -1)]));
    }

    #[test]
    fn rejects_wrong_kind_and_garbage() {
        let a = KSparse::new(2, 1e-6, 1);
        assert!(L0Sampler::from_bytes(&a.to_bytes()).is_err());
        assert!(KSparse::from_bytes(b"nope").is_err());
        let mut bytes = a.to_bytes();
        bytes.push(0);
        assert!(KSparse::from_bytes(&bytes).is_err());
    }

    #[test]
    fn other_kinds_round_trip() {
        let mut s = L0Sampler::new(5);
        let mut e = L0Estimator::new(0.5, 5);
        let mut p = PStableSketch::new(0.5, 16, 5).unwrap();
        for i in 0..20u128 {
            s.update(i, 1);
            e.update(i, 2);
            p.update(i, 3);
        }
        assert_eq!(L0Sampler::from_bytes(&s.to_bytes()).unwrap(), s);
        assert_eq!(L0Estimator::from_bytes(&e.to_bytes()).unwrap(), e);
        assert_eq!(PStableSketch::from_bytes(&p.to_bytes()).unwrap(), p);
    }
}
