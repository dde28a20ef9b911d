use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64 as C64;

use super::{MatrixProductState, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::{svd, truncation_rank, Reshape};

/// Largest chain converted to a dense vector unless the caller raises it.
pub const DEFAULT_ORACLE_LIMIT: usize = 14;

impl MatrixProductState {
    /// Dense amplitudes, site 0 in the most significant bit.
    pub fn to_dense(&self, limit: usize) -> Result<Array1<C64>> {
        let l = self.len();
        if l > limit {
            return Err(Error::OracleLimit { len: l, limit });
        }
        // rows enumerate configurations of the sites contracted so far
        let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in self.tensors() {
            let (dl, d, dr) = t.dim();
            let rows = acc.nrows();
            let mut next = Array2::zeros((rows * d, dr));
            for s in 0..d {
                let ts = t.index_axis(ndarray::Axis(1), s);
                let part = acc.dot(&ts);
                for r in 0..rows {
                    next.row_mut(r * d + s).assign(&part.row(r));
                }
            }
            debug_assert_eq!(dl, acc.ncols());
            acc = next;
        }
        let scale = self.log_norm_adjust().exp();
        Ok(acc.column(0).mapv(|x| x * scale))
    }

    /// Exact (or truncated) MPS of a dense vector by successive SVDs.
    pub fn from_dense(amplitudes: &[C64], policy: &TruncationPolicy) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "dense vector length {dim} is not a power of two"
            )));
        }
        let l = dim.trailing_zeros() as usize;
        let mut tensors = Vec::with_capacity(l);
        let mut rest = Array2::from_shape_vec((1, dim), amplitudes.to_vec())?;
        for n in 0..l - 1 {
            let dl = rest.nrows();
            let cols = rest.ncols() / 2;
            let m = rest.reshaped((dl * 2, cols))?;
            let (u, s, vt) = svd(&m)?;
            let (k, _) = truncation_rank(s.as_slice().unwrap(), policy.max_bond, policy.cutoff);
            let u = u.slice(ndarray::s![.., ..k]).to_owned();
            tensors.push(u.reshaped((dl, 2, k))?);
            let mut r = vt.slice(ndarray::s![..k, ..]).to_owned();
            for i in 0..k {
                r.row_mut(i).mapv_inplace(|x| x * s[i]);
            }
            rest = r;
            let _ = n;
        }
        let dl = rest.nrows();
        tensors.push(Array3::from_shape_vec((dl, 2, 1), rest.into_raw_vec_and_offset().0)?);
        let mut psi = MatrixProductState::from_tensors(tensors, Some(l - 1), 0.0)?;
        psi.fold_norm();
        Ok(psi)
    }
}
