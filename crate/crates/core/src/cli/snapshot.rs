//! Binary connection snapshots.
//!
//! Little-endian layout:
//!
//! ```text
//! "YMB1"  u16 version=1
//! u32 n   u32 N   f64 L   u32 rank   u8 has_background
//! 6 × (f64 re, f64 im)        background coefficients (zero if absent)
//! u64 seed
//! a01 samples on the base grid, point-major: for each point, for each
//! dz̄_k, for each matrix entry (row-major): f64 re, f64 im
//! ```
//!
//! The dealiasing switch is a property of the run, not of the state, so it
//! is supplied when reading.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::connection::{Background, Connection};
use crate::error::{Error, Result};
use crate::field::{MatrixField, C64};
use crate::forms::FormPQ;
use crate::geometry::TorusGeometry;

const MAGIC: &[u8; 4] = b"YMB1";
const VERSION: u16 = 1;

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub connection: Connection,
    pub seed: u64,
}

pub fn write_snapshot<W: Write>(out: &mut W, a: &Connection, seed: u64) -> Result<()> {
    let geom = a.geom();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(geom.n() as u32).to_le_bytes());
    buf.extend_from_slice(&(geom.dims()[0] as u32).to_le_bytes());
    buf.extend_from_slice(&geom.period().to_le_bytes());
    buf.extend_from_slice(&(a.rank() as u32).to_le_bytes());
    buf.push(u8::from(a.background().is_some()));
    let coeffs = a.background().map_or([C64::new(0.0, 0.0); 6], |b| b.coeffs());
    for c in coeffs {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    buf.extend_from_slice(&seed.to_le_bytes());
    let comps: Vec<MatrixField> = a.a01().components().iter().map(|c| c.project_to_base()).collect();
    let npts = geom.npoints();
    let rr = a.rank() * a.rank();
    for pt in 0..npts {
        for c in &comps {
            for e in 0..rr {
                let v = c.data()[e * npts + pt];
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        let end = self.pos + K;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated while reading {what} at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(what)?) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn c64(&mut self, what: &str) -> Result<C64> {
        Ok(C64::new(self.f64(what)?, self.f64(what)?))
    }
}

pub fn read_snapshot<R: Read>(input: &mut R, dealias: bool) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if &cur.take::<4>("magic")? != MAGIC {
        return Err(Error::Format("bad magic, not a connection snapshot".into()));
    }
    let version = u16::from_le_bytes(cur.take("version")?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = cur.u32("n")?;
    let grid = cur.u32("grid")?;
    let period = cur.f64("period")?;
    let rank = cur.u32("rank")?;
    let has_bg = match cur.take::<1>("background flag")?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("background flag {b}"))),
    };
    let mut coeffs = [C64::new(0.0, 0.0); 6];
    for c in coeffs.iter_mut() {
        *c = cur.c64("background")?;
    }
    let seed = u64::from_le_bytes(cur.take("seed")?);
    let geom: Arc<TorusGeometry> =
        TorusGeometry::new(n, grid, period, dealias).map_err(|e| Error::Format(format!("header: {e}")))?;
    if rank == 0 || rank > 64 {
        return Err(Error::Format(format!("rank {rank}")));
    }
    let npts = geom.npoints();
    let rr = rank * rank;
    let expected = npts * n * rr * 16;
    let remaining = bytes.len() - cur.pos;
    if remaining != expected {
        let why = if remaining < expected { "truncated" } else { "trailing bytes in" };
        return Err(Error::Format(format!("{why} payload: {remaining} bytes, expected {expected}")));
    }
    let mut planes = vec![vec![C64::new(0.0, 0.0); npts * rr]; n];
    for pt in 0..npts {
        for plane in planes.iter_mut() {
            for e in 0..rr {
                plane[e * npts + pt] = cur.c64("samples")?;
            }
        }
    }
    if planes.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Format("non-finite samples".into()));
    }
    let comps = planes.into_iter().map(|p| MatrixField::from_base_samples(&geom, rank, p)).collect();
    let a01 = FormPQ::from_components(0, 1, comps)?;
    let bg = has_bg.then(|| Background::from_coeffs(coeffs));
    let connection = Connection::new(a01, bg).map_err(|e| Error::Format(e.to_string()))?;
    Ok(Snapshot { connection, seed })
}
