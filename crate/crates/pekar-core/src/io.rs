//! Binary field files and dense matrix dumps.
//!
//! Field layout (little endian): `b"PEKR"`, version `u32`, `L` as `f64`,
//! `n` as `u32`, flags `u32` (bit 0: real-valued), then `n³` coefficients
//! as `(re, im)` pairs of `f64`. Coefficients are written row-major in
//! ascending signed mode order `m = -n/2, …, n/2 - 1` on every axis.
//!
//! Matrix layout: `b"PEKM"`, version `u32`, `N` as `u32`, flags `u32`
//! (bit 0: symmetric), then `N²` `f64` entries row-major.

use crate::error::{Error, Result};
use crate::lattice::{Field, MomentumLattice, C64};
use nalgebra::DMatrix;
use std::io::{Read, Write};
use std::path::Path;

const FIELD_MAGIC: &[u8; 4] = b"PEKR";
const MATRIX_MAGIC: &[u8; 4] = b"PEKM";
pub const FORMAT_VERSION: u32 = 1;

/// Storage position for ascending-order file slot `slot`.
fn slot_to_index(lat: &MomentumLattice, slot: usize) -> usize {
    let n = lat.n();
    let shift = |j: usize| (j + n / 2) % n;
    let (jx, jy, jz) = (slot / (n * n), (slot / n) % n, slot % n);
    (shift(jx) * n + shift(jy)) * n + shift(jz)
}

pub fn write_field<W: Write>(mut w: W, f: &Field) -> Result<()> {
    let lat = f.lattice();
    let n = u32::try_from(lat.n()).map_err(|_| Error::Format("grid too large".into()))?;
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&lat.side_length().to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&u32::from(f.is_real()).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * lat.len());
    for slot in 0..lat.len() {
        let c = f.coeffs()[slot_to_index(lat, slot)];
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported field file version {version}")));
    }
    let side = read_f64(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    let flags = read_u32(&mut r)?;
    let lat = MomentumLattice::new(side, n)?;
    let mut raw = vec![0u8; 16 * lat.len()];
    r.read_exact(&mut raw)?;
    let mut coeffs = vec![C64::new(0.0, 0.0); lat.len()];
    for (slot, chunk) in raw.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
        coeffs[slot_to_index(&lat, slot)] = C64::new(re, im);
    }
    Field::from_coeffs(lat, coeffs, flags & 1 == 1)
}

pub fn save_field(path: &Path, f: &Field) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(file), f)
}

pub fn load_field(path: &Path) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>, symmetric: bool) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Format("matrix dump needs a square matrix".into()));
    }
    let n = u32::try_from(m.nrows()).map_err(|_| Error::Format("matrix too large".into()))?;
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&u32::from(symmetric).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("not a matrix file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported matrix file version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let _flags = read_u32(&mut r)?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = read_f64(&mut r)?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn field_roundtrip() {
        let lat = MomentumLattice::new(2.5, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let f = Field::random_real(lat, &mut rng, |_| 1.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 24 + 16 * lat.len());
        assert_eq!(&buf[..4], b"PEKR");
        let g = read_field(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn file_order_is_ascending_modes() {
        let lat = MomentumLattice::new(1.0, 4).unwrap();
        let f = Field::plane_wave(lat, [-1, 0, 1]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        // slot of (m + n/2) = (1, 2, 3)
        let slot = (4 + 2) * 4 + 3;
        let off = 24 + 16 * slot;
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), 1.0);
    }

    #[test]
    fn rejects_bad_magic() {
        assert!(read_field(&b"NOPE0000"[..]).is_err());
    }

    #[test]
    fn matrix_roundtrip() {
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.5);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m, false).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }
}
