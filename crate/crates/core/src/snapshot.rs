//! Binary field snapshots.
//!
//! Layout (little-endian): `b"DS3F"`, version `u32`, `n1 n2 n3` as `u32`,
//! `L1 L2 L3` as `f64`, zero padding to 64 bytes, then `n1*n2*n3` pairs
//! `(re, im)` of `f64` with `x3` fastest.

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::GridSpec;
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"DS3F";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

pub fn encode<T: Real>(f: &ComplexField<T>) -> Vec<u8> {
    let grid = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * grid.total());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in grid.n {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for l in grid.len {
        out.extend_from_slice(&l.as_f64().to_le_bytes());
    }
    out.resize(HEADER_LEN, 0);
    for v in f.values() {
        out.extend_from_slice(&v.re.as_f64().to_le_bytes());
        out.extend_from_slice(&v.im.as_f64().to_le_bytes());
    }
    out
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<ComplexField<T>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing DS3F header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let len = [f64_at(20), f64_at(28), f64_at(36)].map(T::lit);
    let grid = GridSpec::new(n, len)?;
    let expected = HEADER_LEN + 16 * grid.total();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, grid needs {}",
            bytes.len(),
            expected
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    ComplexField::new(grid, values)
}

pub fn write<T: Real>(f: &ComplexField<T>, mut w: impl Write) -> Result<()> {
    w.write_all(&encode(f))?;
    Ok(())
}

pub fn read<T: Real>(mut r: impl Read) -> Result<ComplexField<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let grid = GridSpec::new([8, 10, 12], [1.0, 2.5, 3.0]).unwrap();
        let f = ComplexField::from_fn(&grid, |x| Complex::new(x[0] + x[1], x[2] * 0.5));
        let bytes = encode(&f);
        assert_eq!(bytes.len(), 64 + 16 * 960);
        assert_eq!(&bytes[..4], b"DS3F");
        let g: ComplexField<f64> = decode(&bytes).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let grid = GridSpec::cubic(8, 1.0).unwrap();
        let bytes = encode(&ComplexField::<f64>::zeros(&grid));
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
    }
}
