//! Open-boundary matrix product states.
//!
//! Conventions, shared by every oracle in the crate:
//!
//! * site tensors have shape `(left bond, physical, right bond)`;
//! * physical index 0 is spin up (`Z = +1`), index 1 is spin down;
//! * dense vectors put site 0 in the most significant bit, so a single flip
//!   at site `n` of an `L`-site chain sits at index `1 << (L - 1 - n)`;
//! * two-site gates act on `|s_n s_{n+1}>` with row index `2 s_n + s_{n+1}`.
//!
//! The represented state is `exp(log_norm_adjust)` times the plain tensor
//! contraction. Gate application folds the norm of the center tensor into
//! `log_norm_adjust` so thousands of steps never underflow.

mod dense;
mod expect;
mod gates;
pub mod io;
mod schmidt;

pub use dense::DEFAULT_ORACLE_LIMIT;
pub use expect::LocalExpectations;
pub use gates::{GateReport, Sweep};
pub use schmidt::{Projection, SchmidtSpectrum};

use ndarray::{Array2, Array3};
use ndarray_linalg::QR;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, frobenius_sq, unitarity_defect, Reshape, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncationPolicy {
    pub max_bond: usize,
    /// Largest relative squared weight that may be discarded at one bond.
    pub cutoff: f64,
    pub renormalize_after_truncation: bool,
}

impl TruncationPolicy {
    pub fn new(max_bond: usize, cutoff: f64) -> Result<Self> {
        let p = Self {
            max_bond,
            cutoff,
            renormalize_after_truncation: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// No truncation beyond dropping exact zeros.
    pub fn exact() -> Self {
        Self {
            max_bond: usize::MAX,
            cutoff: 0.0,
            renormalize_after_truncation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_bond < 1 {
            return Err(Error::InvalidArgument("max_bond must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must lie in [0, 1), got {}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_bond: 600,
            cutoff: 1e-9,
            renormalize_after_truncation: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProductState {
    tensors: Vec<Array3<C64>>,
    center: Option<usize>,
    log_norm_adjust: f64,
}

impl MatrixProductState {
    /// Product state from per-site amplitude pairs `(up, down)`.
    pub fn from_site_amplitudes(sites: &[[C64; 2]]) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        let tensors = sites
            .iter()
            .map(|a| Array3::from_shape_vec((1, 2, 1), vec![a[0], a[1]]).unwrap())
            .collect();
        let mut psi = Self {
            tensors,
            center: None,
            log_norm_adjust: 0.0,
        };
        psi.canonicalize(0)?;
        Ok(psi)
    }

    /// Computational basis state; `spins[n] = 1` means site `n` is flipped down.
    pub fn basis_state(spins: &[u8]) -> Result<Self> {
        let sites: Vec<[C64; 2]> = spins
            .iter()
            .map(|&s| if s == 0 { [ONE, ZERO] } else { [ZERO, ONE] })
            .collect();
        Self::from_site_amplitudes(&sites)
    }

    pub fn all_up(length: usize) -> Self {
        Self::basis_state(&vec![0; length]).expect("length > 0")
    }

    /// Wraps raw tensors after checking bond consistency.
    pub fn from_tensors(tensors: Vec<Array3<C64>>, center: Option<usize>, log_norm_adjust: f64) -> Result<Self> {
        let psi = Self {
            tensors,
            center,
            log_norm_adjust,
        };
        psi.validate()?;
        Ok(psi)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.tensors.len();
        if l == 0 {
            return Err(Error::Structure("no site tensors".into()));
        }
        if self.tensors[0].dim().0 != 1 || self.tensors[l - 1].dim().2 != 1 {
            return Err(Error::Structure("boundary bonds must have dimension 1".into()));
        }
        for (n, t) in self.tensors.iter().enumerate() {
            if t.dim().1 != 2 {
                return Err(Error::Structure(format!("site {n} has physical dimension {}", t.dim().1)));
            }
            if n + 1 < l && t.dim().2 != self.tensors[n + 1].dim().0 {
                return Err(Error::Structure(format!(
                    "bond {n}: right dimension {} does not match left dimension {} of site {}",
                    t.dim().2,
                    self.tensors[n + 1].dim().0,
                    n + 1
                )));
            }
        }
        if let Some(c) = self.center {
            if c >= l {
                return Err(Error::Structure(format!("canonical center {c} outside {l} sites")));
            }
        }
        if !self.log_norm_adjust.is_finite() {
            return Err(Error::Structure("non-finite log norm".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn log_norm_adjust(&self) -> f64 {
        self.log_norm_adjust
    }

    /// Bond dimensions `D_0 .. D_L`, including the trivial boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.tensors.iter().map(|t| t.dim().0).collect();
        d.push(1);
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn norm_sq(&self) -> f64 {
        match self.center {
            Some(c) => frobenius_sq(self.tensors[c].iter()) * (2.0 * self.log_norm_adjust).exp(),
            None => inner_product(self, self).map(|z| z.re).unwrap_or(0.0),
        }
    }

    /// Moves the canonical center to `center`, leaving the state unchanged.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let l = self.len();
        if center >= l {
            return Err(Error::InvalidArgument(format!("center {center} outside {l} sites")));
        }
        self.validate()?;
        match self.center {
            Some(c) => {
                for n in c..center {
                    self.shift_right(n)?;
                }
                for n in (center + 1..=c).rev() {
                    self.shift_left(n)?;
                }
            }
            None => {
                for n in 0..center {
                    self.shift_right(n)?;
                }
                for n in (center + 1..l).rev() {
                    self.shift_left(n)?;
                }
            }
        }
        self.center = Some(center);
        Ok(())
    }

    /// Consuming variant of [`canonicalize`](Self::canonicalize).
    pub fn canonicalized(mut self, center: usize) -> Result<Self> {
        self.canonicalize(center)?;
        Ok(self)
    }

    /// Rescales so that the squared norm is one.
    pub fn normalize(&mut self) -> Result<()> {
        let c = match self.center {
            Some(c) => c,
            None => {
                self.canonicalize(0)?;
                0
            }
        };
        let f = frobenius_sq(self.tensors[c].iter()).sqrt();
        if f == 0.0 {
            return Err(Error::ZeroNorm);
        }
        self.tensors[c].mapv_inplace(|x| x / f);
        self.log_norm_adjust = 0.0;
        Ok(())
    }

    /// Moves the Frobenius norm of the center tensor into the log accumulator.
    pub(crate) fn fold_norm(&mut self) {
        if let Some(c) = self.center {
            let f = frobenius_sq(self.tensors[c].iter()).sqrt();
            if f > 0.0 && f.is_finite() {
                self.tensors[c].mapv_inplace(|x| x / f);
                self.log_norm_adjust += f.ln();
            }
        }
    }

    /// QR step: site `n` becomes a left isometry, the remainder goes to `n + 1`.
    fn shift_right(&mut self, n: usize) -> Result<()> {
        let (dl, d, dr) = self.tensors[n].dim();
        let m = self.tensors[n].to_shape((dl * d, dr))?.to_owned();
        let (q, r) = m.qr()?;
        let k = q.ncols();
        self.tensors[n] = q.reshaped((dl, d, k))?;
        let next = &self.tensors[n + 1];
        let (_, d2, dr2) = next.dim();
        let nm = next.to_shape((dr, d2 * dr2))?;
        self.tensors[n + 1] = r.dot(&nm).reshaped((k, d2, dr2))?;
        Ok(())
    }

    /// LQ step: site `n` becomes a right isometry, the remainder goes to `n - 1`.
    fn shift_left(&mut self, n: usize) -> Result<()> {
        let (dl, d, dr) = self.tensors[n].dim();
        let m = self.tensors[n].to_shape((dl, d * dr))?.to_owned();
        let (q, r) = adjoint(&m.view()).qr()?;
        let k = q.ncols();
        let qa = adjoint(&q.view());
        self.tensors[n] = qa.reshaped((k, d, dr))?;
        let prev = &self.tensors[n - 1];
        let (dl0, d0, _) = prev.dim();
        let pm = prev.to_shape((dl0 * d0, dl))?;
        self.tensors[n - 1] = pm.dot(&adjoint(&r.view())).reshaped((dl0, d0, k))?;
        Ok(())
    }

    /// Applies a one-site operator. Unitary operators keep the canonical form;
    /// others drop the center marker unless they act on the center itself.
    pub fn apply_one_site(&mut self, site: usize, op: &Array2<C64>) -> Result<()> {
        if site >= self.len() {
            return Err(Error::InvalidArgument(format!("site {site} outside chain")));
        }
        let t = &self.tensors[site];
        let (dl, d, dr) = t.dim();
        let mut out = Array3::zeros((dl, d, dr));
        for s in 0..d {
            for t_ in 0..d {
                let c = op[[s, t_]];
                if c == ZERO {
                    continue;
                }
                let src = t.index_axis(ndarray::Axis(1), t_);
                let mut dst = out.index_axis_mut(ndarray::Axis(1), s);
                dst.scaled_add(c, &src);
            }
        }
        self.tensors[site] = out;
        if self.center != Some(site) && unitarity_defect(op) > 1e-12 {
            self.center = None;
        }
        Ok(())
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<Array3<C64>> {
        &mut self.tensors
    }

    pub(crate) fn set_center(&mut self, c: Option<usize>) {
        self.center = c;
    }
}

/// `<a|b>`, including both norm accumulators.
pub fn inner_product(a: &MatrixProductState, b: &MatrixProductState) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut env = Array2::from_elem((1, 1), ONE);
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        env = expect::transfer(&env, ta, tb, None);
    }
    Ok(env[[0, 0]] * (a.log_norm_adjust + b.log_norm_adjust).exp())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random MPS with bond dimensions up to `chi`, not normalized, no center.
    pub fn random_mps(length: usize, chi: usize, seed: u64) -> MatrixProductState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![1usize; length + 1];
        for b in 1..length {
            let cap = 1usize << b.min(length - b).min(20);
            dims[b] = chi.min(cap);
        }
        let tensors = (0..length)
            .map(|n| {
                Array3::from_shape_fn((dims[n], 2, dims[n + 1]), |_| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                })
            })
            .collect();
        MatrixProductState::from_tensors(tensors, None, 0.3).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::random_mps;
    use super::*;

    fn is_left_isometry(t: &Array3<C64>) -> bool {
        let (dl, d, dr) = t.dim();
        let m = t.to_shape((dl * d, dr)).unwrap().to_owned();
        let p = adjoint(&m.view()).dot(&m);
        (0..dr).all(|i| (0..dr).all(|j| (p[[i, j]] - if i == j { ONE } else { ZERO }).norm() < 1e-11))
    }

    fn is_right_isometry(t: &Array3<C64>) -> bool {
        let (dl, d, dr) = t.dim();
        let m = t.to_shape((dl, d * dr)).unwrap().to_owned();
        let p = m.dot(&adjoint(&m.view()));
        (0..dl).all(|i| (0..dl).all(|j| (p[[i, j]] - if i == j { ONE } else { ZERO }).norm() < 1e-11))
    }

    #[test]
    fn product_state_is_already_canonical() {
        let mut psi = MatrixProductState::all_up(6);
        let before = psi.to_dense(14).unwrap();
        psi.canonicalize(3).unwrap();
        assert_eq!(psi.center(), Some(3));
        let after = psi.to_dense(14).unwrap();
        assert!((before[0] - ONE).norm() < 1e-15);
        assert!(before.iter().zip(after.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn canonical_form_isometries_and_dense_invariance() {
        let mut psi = random_mps(8, 6, 11);
        let reference = psi.to_dense(14).unwrap();
        let norm_before = psi.norm_sq();
        psi.canonicalize(0).unwrap();
        let d0 = psi.to_dense(14).unwrap();
        psi.canonicalize(7).unwrap();
        let d7 = psi.to_dense(14).unwrap();
        for i in 0..reference.len() {
            assert!((d0[i] - reference[i]).norm() < 1e-12);
            assert!((d7[i] - d0[i]).norm() < 1e-12);
        }
        psi.canonicalize(4).unwrap();
        for n in 0..4 {
            assert!(is_left_isometry(&psi.tensors()[n]));
        }
        for n in 5..8 {
            assert!(is_right_isometry(&psi.tensors()[n]));
        }
        assert!((psi.norm_sq() - norm_before).abs() < 1e-12 * norm_before);
    }

    #[test]
    fn malformed_bonds_are_rejected() {
        let t0 = Array3::<C64>::zeros((1, 2, 2));
        let t1 = Array3::<C64>::zeros((3, 2, 1));
        let err = MatrixProductState::from_tensors(vec![t0, t1], None, 0.0).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
        assert!(MatrixProductState::all_up(3).canonicalized(5).is_err());
    }

    #[test]
    fn inner_products() {
        let mut psi = random_mps(9, 5, 3);
        psi.normalize().unwrap();
        assert!((inner_product(&psi, &psi).unwrap() - ONE).norm() < 1e-12);
        let a = MatrixProductState::basis_state(&[0, 1, 0, 0]).unwrap();
        let b = MatrixProductState::basis_state(&[0, 0, 1, 0]).unwrap();
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-15);
        let c = MatrixProductState::all_up(5);
        assert!(matches!(inner_product(&a, &c), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn inner_product_matches_dense_dot() {
        let a = random_mps(9, 4, 21);
        let b = random_mps(9, 7, 22);
        let da = a.to_dense(14).unwrap();
        let db = b.to_dense(14).unwrap();
        let dense: C64 = da.iter().zip(db.iter()).map(|(x, y)| x.conj() * y).sum();
        let got = inner_product(&a, &b).unwrap();
        assert!((got - dense).norm() < 1e-12 * dense.norm().max(1.0));
    }
}
