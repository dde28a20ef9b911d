use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64 as C64;

use super::MatrixProductState;
use crate::error::{Error, Result};
use crate::linalg::{adjoint, ONE, ZERO};

pub(crate) type SiteOp = [[C64; 2]; 2];

/// Left transfer: `E'[b, b'] = sum op[s,t] conj(A[a,s,b]) E[a,a'] B[a',t,b']`.
pub(crate) fn transfer(env: &Array2<C64>, bra: &Array3<C64>, ket: &Array3<C64>, op: Option<&SiteOp>) -> Array2<C64> {
    let (_, d, dbr) = bra.dim();
    let dkr = ket.dim().2;
    let mut out = Array2::zeros((dbr, dkr));
    for t in 0..d {
        let m = env.dot(&ket.index_axis(Axis(1), t));
        for s in 0..d {
            let c = match op {
                Some(o) => o[s][t],
                None if s == t => ONE,
                None => ZERO,
            };
            if c == ZERO {
                continue;
            }
            let a = adjoint(&bra.index_axis(Axis(1), s));
            out.scaled_add(c, &a.dot(&m));
        }
    }
    out
}

/// Right transfer: `R[a, a'] = sum op[s,t] conj(A[a,s,b]) R[b,b'] B[a',t,b']`.
pub(crate) fn transfer_right(env: &Array2<C64>, bra: &Array3<C64>, ket: &Array3<C64>, op: Option<&SiteOp>) -> Array2<C64> {
    let (dbl, d, _) = bra.dim();
    let dkl = ket.dim().0;
    let mut out = Array2::zeros((dbl, dkl));
    for s in 0..d {
        let m = bra.index_axis(Axis(1), s).mapv(|x| x.conj()).dot(env);
        for t in 0..d {
            let c = match op {
                Some(o) => o[s][t],
                None if s == t => ONE,
                None => ZERO,
            };
            if c == ZERO {
                continue;
            }
            out.scaled_add(c, &m.dot(&ket.index_axis(Axis(1), t).t()));
        }
    }
    out
}

pub(crate) fn close(left: &Array2<C64>, right: &Array2<C64>) -> C64 {
    left.iter().zip(right.iter()).map(|(a, b)| a * b).sum()
}

/// All right environments of `<bra|ket>`; entry `n` covers sites `n..L`.
pub(crate) fn right_environments(bra: &MatrixProductState, ket: &MatrixProductState) -> Vec<Array2<C64>> {
    let l = bra.len();
    let mut envs = vec![Array2::from_elem((1, 1), ONE); l + 1];
    for n in (0..l).rev() {
        envs[n] = transfer_right(&envs[n + 1], &bra.tensors()[n], &ket.tensors()[n], None);
    }
    envs
}

pub(crate) const PAULI_X: SiteOp = [[ZERO, ONE], [ONE, ZERO]];
pub(crate) const PAULI_Z: SiteOp = [[ONE, ZERO], [ZERO, C64 { re: -1.0, im: 0.0 }]];

/// Unnormalized one- and two-point expectation values needed by the
/// Ising energy density: `<X_n>`, `<Z_n>` and `<Z_n Z_{n+1}>`, each multiplied
/// by the squared norm of the state.
#[derive(Debug, Clone)]
pub struct LocalExpectations {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Entry `n` is `<Z_n Z_{n+1}>`; length `L - 1`.
    pub zz: Vec<f64>,
    pub norm_sq: f64,
}

impl MatrixProductState {
    pub fn local_expectations(&self) -> LocalExpectations {
        let l = self.len();
        let t = self.tensors();
        let rights = right_environments(self, self);
        let scale = (2.0 * self.log_norm_adjust()).exp();
        let mut out = LocalExpectations {
            x: Vec::with_capacity(l),
            z: Vec::with_capacity(l),
            zz: Vec::with_capacity(l.saturating_sub(1)),
            norm_sq: close(&Array2::from_elem((1, 1), ONE), &rights[0]).re * scale,
        };
        let mut left = Array2::from_elem((1, 1), ONE);
        for n in 0..l {
            let ex = transfer(&left, &t[n], &t[n], Some(&PAULI_X));
            out.x.push(close(&ex, &rights[n + 1]).re * scale);
            let ez = transfer(&left, &t[n], &t[n], Some(&PAULI_Z));
            out.z.push(close(&ez, &rights[n + 1]).re * scale);
            if n + 1 < l {
                let ezz = transfer(&ez, &t[n + 1], &t[n + 1], Some(&PAULI_Z));
                out.zz.push(close(&ezz, &rights[n + 2]).re * scale);
            }
            left = transfer(&left, &t[n], &t[n], None);
        }
        out
    }

    /// `<reference| X_n |self>` for every site `n` in `sites`.
    pub fn flip_amplitudes(&self, reference: &MatrixProductState, sites: std::ops::Range<usize>) -> Result<Vec<C64>> {
        if reference.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: reference.len(),
                right: self.len(),
            });
        }
        if sites.end > self.len() {
            return Err(Error::Window(format!("sites {sites:?} exceed the chain")));
        }
        let rights = right_environments(reference, self);
        let scale = (reference.log_norm_adjust() + self.log_norm_adjust()).exp();
        let (rt, kt) = (reference.tensors(), self.tensors());
        let mut left = Array2::from_elem((1, 1), ONE);
        let mut out = Vec::with_capacity(sites.len());
        for n in 0..sites.end {
            if n >= sites.start {
                let e = transfer(&left, &rt[n], &kt[n], Some(&PAULI_X));
                out.push(close(&e, &rights[n + 1]) * scale);
            }
            left = transfer(&left, &rt[n], &kt[n], None);
        }
        Ok(out)
    }
}
