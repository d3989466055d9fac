//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 5     | magic `RAFT1`                            |
//! | 1     | kind: 0 = surface, 1 = bulk              |
//! | 4     | `u32` N                                  |
//! | 4     | `u32` Mz (0 for surface fields)          |
//! | 8     | `f64` L                                  |
//! | 8     | `f64` H (0 for surface fields)           |
//! | ...   | `f64` grid values, row-major, `x1` fastest |
//!
//! Bulk values are sampled on the midpoint grid `z_j = (j + 1/2) H / Mz`
//! with `z` slowest. Coefficients are normalized so that the zero mode is
//! the mean value; loading re-derives them from the grid.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{BulkField, SlabGeometry, SpectralError, SurfaceField, TorusGeometry};

const MAGIC: &[u8; 5] = b"RAFT1";
const KIND_SURFACE: u8 = 0;
const KIND_BULK: u8 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unknown field kind {0}")]
    BadKind(u8),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Debug)]
pub enum Snapshot {
    Surface(SurfaceField),
    Bulk(BulkField),
}

pub fn encode_surface(f: &SurfaceField) -> Vec<u8> {
    let g = f.geometry();
    let mut out = header(KIND_SURFACE, g.n(), 0, g.length(), 0.0);
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_bulk(u: &BulkField) -> Vec<u8> {
    let g = u.geometry();
    let mut out = header(KIND_BULK, g.base().n(), g.modes(), g.base().length(), g.depth());
    for v in u.to_grid() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn header(kind: u8, n: usize, mz: usize, length: f64, depth: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(30);
    out.extend_from_slice(MAGIC);
    out.push(kind);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(mz as u32).to_le_bytes());
    out.extend_from_slice(&length.to_le_bytes());
    out.extend_from_slice(&depth.to_le_bytes());
    out
}

pub fn decode(mut r: impl Read) -> Result<Snapshot, SnapshotError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let n = read_u32(&mut r)? as usize;
    let mz = read_u32(&mut r)? as usize;
    let length = read_f64(&mut r)?;
    let depth = read_f64(&mut r)?;
    let base = TorusGeometry::new(length, n)?;
    match kind[0] {
        KIND_SURFACE => {
            let values = read_values(&mut r, base.len())?;
            Ok(Snapshot::Surface(SurfaceField::from_values(&base, values)?))
        }
        KIND_BULK => {
            let slab = SlabGeometry::new(base, depth, mz)?;
            let values = read_values(&mut r, slab.len())?;
            Ok(Snapshot::Bulk(BulkField::from_grid(&slab, &values)?))
        }
        k => Err(SnapshotError::BadKind(k)),
    }
}

pub fn write_surface(path: impl AsRef<Path>, f: &SurfaceField) -> Result<(), SnapshotError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_surface(f))?;
    w.flush()?;
    Ok(())
}

pub fn write_bulk(path: impl AsRef<Path>, u: &BulkField) -> Result<(), SnapshotError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_bulk(u))?;
    w.flush()?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Snapshot, SnapshotError> {
    decode(BufReader::new(File::open(path)?))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_values(r: &mut impl Read, count: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = TorusGeometry::new(2.0, 4).unwrap();
        let f = SurfaceField::constant(&g, 1.5);
        let bytes = encode_surface(&f);
        assert_eq!(&bytes[..5], b"RAFT1");
        assert_eq!(bytes[5], 0);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 0);
        assert_eq!(f64::from_le_bytes(bytes[14..22].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(bytes[22..30].try_into().unwrap()), 0.0);
        assert_eq!(bytes.len(), 30 + 16 * 8);
        assert_eq!(f64::from_le_bytes(bytes[30..38].try_into().unwrap()), 1.5);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(decode(&b"RAFT2xxxxxxxxxxxxxxxxxxxxxxxxxxxxx"[..]), Err(SnapshotError::BadMagic)));
        let mut bytes = encode_surface(&SurfaceField::zeros(&TorusGeometry::new(1.0, 4).unwrap()));
        bytes[5] = 7;
        assert!(matches!(decode(&bytes[..]), Err(SnapshotError::BadKind(7))));
        bytes[5] = 0;
        bytes.truncate(40);
        assert!(matches!(decode(&bytes[..]), Err(SnapshotError::Io(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn surface_round_trip_is_bit_exact(values in proptest::collection::vec(-1e3f64..1e3, 64)) {
            let g = TorusGeometry::new(1.25, 8).unwrap();
            let f = SurfaceField::from_values(&g, values).unwrap();
            match decode(&encode_surface(&f)[..]).unwrap() {
                Snapshot::Surface(back) => prop_assert_eq!(back.values(), f.values()),
                Snapshot::Bulk(_) => prop_assert!(false, "wrong kind"),
            }
        }

        #[test]
        fn bulk_round_trip(values in proptest::collection::vec(-1.0f64..1.0, 4 * 16)) {
            let g = SlabGeometry::new(TorusGeometry::new(1.0, 4).unwrap(), 0.5, 4).unwrap();
            let u = BulkField::from_grid(&g, &values).unwrap();
            match decode(&encode_bulk(&u)[..]).unwrap() {
                Snapshot::Bulk(back) => {
                    for (a, b) in back.to_grid().iter().zip(&values) {
                        prop_assert!((a - b).abs() < 1e-13);
                    }
                    prop_assert_eq!(back.geometry(), &g);
                }
                Snapshot::Surface(_) => prop_assert!(false, "wrong kind"),
            }
        }
    }
}
