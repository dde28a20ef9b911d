//! Binary state snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field            | type                                  |
//! |------------------|---------------------------------------|
//! | magic            | 8 bytes, `SCLBMPS\0`                  |
//! | format version   | `u32` (currently 1)                   |
//! | length `L`       | `u64`                                 |
//! | canonical center | `i64`, `-1` when none                 |
//! | log norm         | `f64`                                 |
//! | bond dimensions  | `L + 1` values of `u64`               |
//! | tensors          | per site, `(left, phys, right)` row-major, each entry `re: f64, im: f64` |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64 as C64;

use super::MatrixProductState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SCLBMPS\0";
pub const FORMAT_VERSION: u32 = 1;

/// Largest bond dimension accepted when reading, to reject corrupt headers early.
const MAX_BOND_ON_READ: u64 = 1 << 16;

pub fn write_snapshot<W: Write>(state: &MatrixProductState, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(state.len() as u64).to_le_bytes())?;
    let center = state.center().map_or(-1i64, |c| c as i64);
    w.write_all(&center.to_le_bytes())?;
    w.write_all(&state.log_norm_adjust().to_le_bytes())?;
    for d in state.bond_dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for t in state.tensors() {
        for z in t.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<MatrixProductState> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a state snapshot (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let len = u64::from_le_bytes(read_array(&mut r)?);
    if len == 0 || len > 1 << 20 {
        return Err(Error::Format(format!("implausible chain length {len}")));
    }
    let len = len as usize;
    let center = i64::from_le_bytes(read_array(&mut r)?);
    let center = match center {
        -1 => None,
        c if c >= 0 && (c as usize) < len => Some(c as usize),
        c => return Err(Error::Format(format!("canonical center {c} out of range"))),
    };
    let log_norm = f64::from_le_bytes(read_array(&mut r)?);
    let mut dims = Vec::with_capacity(len + 1);
    for _ in 0..=len {
        let d = u64::from_le_bytes(read_array(&mut r)?);
        if d == 0 || d > MAX_BOND_ON_READ {
            return Err(Error::Format(format!("implausible bond dimension {d}")));
        }
        dims.push(d as usize);
    }
    let mut tensors = Vec::with_capacity(len);
    for n in 0..len {
        let count = dims[n] * 2 * dims[n + 1];
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64::from_le_bytes(read_array(&mut r)?);
            let im = f64::from_le_bytes(read_array(&mut r)?);
            data.push(C64::new(re, im));
        }
        tensors.push(Array3::from_shape_vec((dims[n], 2, dims[n + 1]), data)?);
    }
    MatrixProductState::from_tensors(tensors, center, log_norm)
}

pub fn save(state: &MatrixProductState, path: &Path) -> Result<()> {
    write_snapshot(state, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<MatrixProductState> {
    read_snapshot(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::testutil::random_mps;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut psi = random_mps(7, 5, 2);
        psi.canonicalize(3).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&psi, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.center(), Some(3));
        assert_eq!(back.log_norm_adjust(), psi.log_norm_adjust());
        assert_eq!(back.tensors(), psi.tensors());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let psi = MatrixProductState::all_up(3);
        let mut buf = Vec::new();
        write_snapshot(&psi, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(bad.as_slice()), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 4];
        assert!(read_snapshot(truncated).is_err());
        let mut version = buf.clone();
        version[8] = 9;
        assert!(matches!(read_snapshot(version.as_slice()), Err(Error::Format(_))));
    }
}
