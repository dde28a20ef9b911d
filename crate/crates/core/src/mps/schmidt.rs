use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::MatrixProductState;
use crate::error::{Error, Result};
use crate::linalg::{svd, Reshape};

/// Squared Schmidt values below this fraction of the total are treated as zeros.
const ZERO_FLOOR: f64 = 1e-15;

/// Squared Schmidt values across the bond between `cut_site` and `cut_site + 1`.
///
/// Values carry the squared norm of the analyzed state, so the spectrum of an
/// unnormalized component sums to that component's weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    pub cut_site: usize,
    pub values: Vec<f64>,
    pub chi: usize,
}

impl SchmidtSpectrum {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Number of values strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }
}

/// Output of [`MatrixProductState::project_schmidt_component`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub state: MatrixProductState,
    /// The keep-set was empty and `state` is the zero vector.
    pub empty: bool,
}

struct CutDecomposition {
    state: MatrixProductState,
    u: Array2<C64>,
    s: Vec<f64>,
    vt: Array2<C64>,
    kept: usize,
}

impl MatrixProductState {
    fn decompose_at(&self, cut: usize) -> Result<CutDecomposition> {
        if cut + 1 >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cut {cut} must lie between two sites of a {}-site chain",
                self.len()
            )));
        }
        let mut state = self.clone();
        if state.center() != Some(cut) {
            state.canonicalize(cut)?;
        }
        let t = &state.tensors()[cut];
        let (dl, d, dr) = t.dim();
        let m = t.to_shape((dl * d, dr))?.to_owned();
        let (u, sv, vt) = svd(&m)?;
        let s: Vec<f64> = sv.to_vec();
        let total: f64 = s.iter().map(|x| x * x).sum();
        let kept = s.iter().take_while(|x| *x * *x > ZERO_FLOOR * total).count().max(1);
        Ok(CutDecomposition { state, u, s, vt, kept })
    }

    /// Schmidt spectrum at a cut; the receiver is left untouched.
    pub fn schmidt_spectrum(&self, cut_site: usize) -> Result<SchmidtSpectrum> {
        let dec = self.decompose_at(cut_site)?;
        let scale = (2.0 * dec.state.log_norm_adjust()).exp();
        let values: Vec<f64> = dec.s[..dec.kept].iter().map(|x| x * x * scale).collect();
        Ok(SchmidtSpectrum {
            cut_site,
            chi: values.len(),
            values,
        })
    }

    /// Keeps only the Schmidt vectors with the given spectrum indices at `cut_site`.
    /// The result is unnormalized: its squared norm is the sum of the kept values.
    pub fn project_schmidt_component(&self, cut_site: usize, keep: &[usize]) -> Result<Projection> {
        let dec = self.decompose_at(cut_site)?;
        let mut idx: Vec<usize> = keep.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= dec.kept) {
            return Err(Error::InvalidArgument(format!(
                "Schmidt index {bad} out of range at cut {cut_site} (spectrum has {} values)",
                dec.kept
            )));
        }
        let mut state = dec.state;
        let (dl, d, _) = state.tensors()[cut_site].dim();
        let (_, d2, dr2) = state.tensors()[cut_site + 1].dim();
        let empty = idx.is_empty();
        let k = idx.len().max(1);
        let mut left = Array2::<C64>::zeros((dl * d, k));
        let mut sv = Array2::<C64>::zeros((k, dec.vt.ncols()));
        if empty {
            left.column_mut(0).assign(&dec.u.column(0));
        } else {
            for (j, &i) in idx.iter().enumerate() {
                left.column_mut(j).assign(&dec.u.column(i));
                sv.row_mut(j).assign(&dec.vt.row(i).mapv(|x| x * dec.s[i]));
            }
        }
        let next = state.tensors()[cut_site + 1].to_shape((dec.vt.ncols(), d2 * dr2))?.to_owned();
        let right = sv.dot(&next);
        let tensors = state.tensors_mut();
        tensors[cut_site] = left.reshaped((dl, d, k))?;
        tensors[cut_site + 1] = right.reshaped((k, d2, dr2))?;
        state.set_center(Some(cut_site + 1));
        if !empty {
            state.fold_norm();
        }
        Ok(Projection { state, empty })
    }
}

/// Reduced density matrix spectrum from a dense vector, for oracles.
#[cfg(test)]
pub(crate) fn dense_schmidt_values(v: &ndarray::Array1<C64>, left_sites: usize, length: usize) -> Vec<f64> {
    let rows = 1usize << left_sites;
    let cols = 1usize << (length - left_sites);
    let m = v.to_shape((rows, cols)).unwrap().to_owned();
    let (_, s, _) = svd(&m).unwrap();
    s.iter().map(|x| x * x).collect()
}
