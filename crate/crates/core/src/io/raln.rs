//! `RALN` binary representation files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `RALN` |
//! | 2 | version `u16` = 1 |
//! | 8 | rows `n` (`u64`) |
//! | 8 | columns `d` (`u64`) |
//! | 1 | dtype `u8` (0 = f64) |
//! | 4 | label length `u32` |
//! | … | label, UTF-8 |
//! | 8·n·d | row-major f64 payload |

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};
use crate::types::RepresentationSet;

pub const MAGIC: [u8; 4] = *b"RALN";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u8 = 0;

pub fn to_bytes(rs: &RepresentationSet) -> Vec<u8> {
    let (n, d) = rs.data().shape();
    let label = rs.label().as_bytes();
    let mut out = Vec::with_capacity(27 + label.len() + 8 * n * d);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.push(DTYPE_F64);
    out.extend_from_slice(&(label.len() as u32).to_le_bytes());
    out.extend_from_slice(label);
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&rs.data()[(i, j)].to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(AlignError::TruncatedPayload {
                expected: (self.pos as u64).saturating_add(k as u64),
                found: self.bytes.len() as u64,
            }),
        }
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("slice length checked"))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<RepresentationSet> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = c.array()?;
    if magic != MAGIC {
        return Err(AlignError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(c.array()?);
    if version != VERSION {
        return Err(AlignError::UnsupportedVersion(version));
    }
    let n = u64::from_le_bytes(c.array()?);
    let d = u64::from_le_bytes(c.array()?);
    let dtype = u8::from_le_bytes(c.array()?);
    if dtype != DTYPE_F64 {
        return Err(AlignError::UnsupportedDtype(dtype));
    }
    let label_len = u32::from_le_bytes(c.array()?) as usize;
    let label = std::str::from_utf8(c.take(label_len)?)
        .map_err(|e| AlignError::ParseError(format!("label is not UTF-8: {e}")))?
        .to_string();
    let payload_len = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| AlignError::ParseError(format!("shape {n}x{d} overflows")))?;
    let remaining = (bytes.len() - c.pos) as u64;
    if remaining < payload_len {
        return Err(AlignError::TruncatedPayload {
            expected: payload_len,
            found: remaining,
        });
    }
    if remaining > payload_len {
        return Err(AlignError::TrailingData(remaining - payload_len));
    }
    let (n, d) = (n as usize, d as usize);
    let payload = c.take(payload_len as usize)?;
    let data = DMatrix::from_fn(n, d, |i, j| {
        let at = 8 * (i * d + j);
        f64::from_le_bytes(payload[at..at + 8].try_into().expect("8 bytes"))
    });
    RepresentationSet::new(label, data)
}

pub fn write_repr(rs: &RepresentationSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(rs))?;
    Ok(())
}

pub fn read_repr(path: impl AsRef<Path>) -> Result<RepresentationSet> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RepresentationSet {
        RepresentationSet::new(
            "layer.3",
            DMatrix::from_row_slice(2, 3, &[1.0, -0.0, 2.5e-300, f64::MAX, 0.1, -7.0]),
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let b = to_bytes(&sample());
        assert_eq!(&b[0..4], b"RALN");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u64::from_le_bytes(b[6..14].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[14..22].try_into().unwrap()), 3);
        assert_eq!(b[22], 0);
        assert_eq!(u32::from_le_bytes(b[23..27].try_into().unwrap()), 7);
        assert_eq!(&b[27..34], b"layer.3");
        assert_eq!(b.len(), 34 + 48);
        // second entry of the first row is -0.0
        assert_eq!(&b[42..50], &(-0.0f64).to_le_bytes());
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let b = to_bytes(&sample());
        let back = from_bytes(&b).unwrap();
        assert_eq!(to_bytes(&back), b);
    }

    #[test]
    fn rejects_corruption() {
        let b = to_bytes(&sample());
        let mut bad = b.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(from_bytes(&bad), Err(AlignError::BadMagic(m)) if &m == b"XXXX"));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(
            from_bytes(&bad),
            Err(AlignError::UnsupportedVersion(2))
        ));
        let mut bad = b.clone();
        bad[22] = 1;
        assert!(matches!(
            from_bytes(&bad),
            Err(AlignError::UnsupportedDtype(1))
        ));
        assert!(matches!(
            from_bytes(&b[..b.len() - 8]),
            Err(AlignError::TruncatedPayload {
                expected: 48,
                found: 40
            })
        ));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(
            from_bytes(&long),
            Err(AlignError::TrailingData(1))
        ));
        assert!(matches!(
            from_bytes(&b[..3]),
            Err(AlignError::TruncatedPayload { .. })
        ));
        let mut nan = b;
        nan[34..42].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            from_bytes(&nan),
            Err(AlignError::NonFiniteEntry { .. })
        ));
    }
}
