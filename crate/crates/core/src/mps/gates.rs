use ndarray::{s, Array2, Array3, Array4, Axis};
use num_complex::Complex64 as C64;

use super::{MatrixProductState, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, svd, truncation_rank, unitarity_defect, Reshape};

/// Where the canonical center ends up after a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Center moves to the rightmost touched site.
    Right,
    /// Center moves to the leftmost touched site.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    /// Squared weight removed by truncation, in units of the state's squared norm
    /// before the truncation (absolute, not relative to the bond).
    pub discarded_weight: f64,
    /// Bond dimension created at the (last) split.
    pub bond_dim: usize,
    /// Gate failed the unitarity check; expected for imaginary-time factors.
    pub non_unitary: bool,
}

struct Split {
    left: Array2<C64>,
    right: Array2<C64>,
    kept_sq: f64,
    total_sq: f64,
    dropped_sq: f64,
}

/// SVD split of `m` with the singular values absorbed according to `sweep`.
fn split(m: &Array2<C64>, policy: &TruncationPolicy, sweep: Sweep) -> Result<Split> {
    let (u, sv, vt) = svd(m)?;
    let s = sv.as_slice().expect("contiguous");
    let (k, dropped_sq) = truncation_rank(s, policy.max_bond, policy.cutoff);
    let total_sq: f64 = s.iter().map(|x| x * x).sum();
    let mut left = u.slice(s![.., ..k]).to_owned();
    let mut right = vt.slice(s![..k, ..]).to_owned();
    match sweep {
        Sweep::Right => {
            for i in 0..k {
                right.row_mut(i).mapv_inplace(|x| x * s[i]);
            }
        }
        Sweep::Left => {
            for i in 0..k {
                left.column_mut(i).mapv_inplace(|x| x * s[i]);
            }
        }
    }
    Ok(Split {
        left,
        right,
        kept_sq: total_sq - dropped_sq,
        total_sq,
        dropped_sq,
    })
}

/// Applies `gate` (row index = output configuration) to the middle axis of
/// `theta` with shape `(dl, g, dr)`.
fn act_on_middle(theta: &Array3<C64>, gate: &Array2<C64>) -> Result<Array3<C64>> {
    let (dl, g, dr) = theta.dim();
    let moved = theta.view().permuted_axes([1, 0, 2]);
    let flat = moved.as_standard_layout().into_owned().reshaped((g, dl * dr))?;
    let out = gate.dot(&flat).reshaped((g, dl, dr))?;
    Ok(out.permuted_axes([1, 0, 2]).as_standard_layout().into_owned())
}

impl MatrixProductState {
    fn ensure_center_within(&mut self, lo: usize, hi: usize) -> Result<()> {
        match self.center {
            Some(c) if c >= lo && c <= hi => Ok(()),
            Some(c) if c < lo => self.canonicalize(lo),
            Some(_) => self.canonicalize(hi),
            None => self.canonicalize(lo),
        }
    }

    /// Contraction of sites `first..first+count` into shape `(dl, 2^count, dr)`.
    fn merged(&self, first: usize, count: usize) -> Result<Array3<C64>> {
        let t = self.tensors();
        let dl = t[first].dim().0;
        let mut acc = t[first].to_shape((dl * 2, t[first].dim().2))?.to_owned();
        for n in first + 1..first + count {
            let (dm, _, dr) = t[n].dim();
            let next = t[n].to_shape((dm, 2 * dr))?;
            let rows = acc.nrows();
            acc = acc.dot(&next).reshaped((rows * 2, dr))?;
        }
        let dr = acc.ncols();
        let g = 1usize << count;
        Ok(acc.reshaped((dl, g, dr))?)
    }

    /// Finishes a gate: rescales for `renormalize_after_truncation`, then moves
    /// the center norm into the log accumulator. Returns absolute discarded weight.
    fn settle(&mut self, scale_sq: f64, total_sq: f64, kept_sq: f64, dropped_sq: f64, policy: &TruncationPolicy) -> f64 {
        let c = self.center.expect("settle after split");
        if policy.renormalize_after_truncation && kept_sq > 0.0 {
            let f = (total_sq / kept_sq).sqrt();
            self.tensors[c].mapv_inplace(|x| x * f);
        }
        self.fold_norm();
        dropped_sq * scale_sq
    }

    /// Applies a 4×4 gate to sites `(bond, bond + 1)` with SVD truncation.
    pub fn apply_two_site_gate(
        &mut self,
        bond: usize,
        gate: &Array2<C64>,
        policy: &TruncationPolicy,
        sweep: Sweep,
    ) -> Result<GateReport> {
        if bond + 1 >= self.len() {
            return Err(Error::InvalidArgument(format!("bond {bond} outside a {}-site chain", self.len())));
        }
        if gate.dim() != (4, 4) {
            return Err(Error::InvalidArgument(format!("two-site gate must be 4x4, got {:?}", gate.dim())));
        }
        self.ensure_center_within(bond, bond + 1)?;
        let theta = act_on_middle(&self.merged(bond, 2)?, gate)?;
        let (dl, _, dr) = theta.dim();
        let (discarded, k) = self.store_two_site_block(bond, theta.reshaped((dl * 2, 2 * dr))?, policy, sweep)?;
        Ok(GateReport {
            discarded_weight: discarded,
            bond_dim: k,
            non_unitary: unitarity_defect(gate) > 1e-10,
        })
    }

    /// Replaces sites `(bond, bond + 1)` by the SVD split of `block`, a matrix of
    /// shape `(left bond · 2, 2 · right bond)`. The canonical center must already
    /// sit on one of the two sites. Returns `(discarded weight, new bond dim)`.
    pub(crate) fn replace_two_site_block(
        &mut self,
        bond: usize,
        block: Array2<C64>,
        policy: &TruncationPolicy,
        sweep: Sweep,
    ) -> Result<(f64, usize)> {
        let dl = self.tensors[bond].dim().0;
        let dr = self.tensors[bond + 1].dim().2;
        if block.dim() != (dl * 2, 2 * dr) || !matches!(self.center, Some(c) if c == bond || c == bond + 1) {
            return Err(Error::Structure(format!("two-site block at bond {bond} does not fit")));
        }
        self.store_two_site_block(bond, block, policy, sweep)
    }

    fn store_two_site_block(
        &mut self,
        bond: usize,
        block: Array2<C64>,
        policy: &TruncationPolicy,
        sweep: Sweep,
    ) -> Result<(f64, usize)> {
        let scale_sq = (2.0 * self.log_norm_adjust).exp();
        let dl = self.tensors[bond].dim().0;
        let dr = self.tensors[bond + 1].dim().2;
        let sp = split(&block, policy, sweep)?;
        let k = sp.left.ncols();
        self.tensors[bond] = sp.left.reshaped((dl, 2, k))?;
        self.tensors[bond + 1] = sp.right.reshaped((k, 2, dr))?;
        self.center = Some(match sweep {
            Sweep::Right => bond + 1,
            Sweep::Left => bond,
        });
        let discarded = self.settle(scale_sq, sp.total_sq, sp.kept_sq, sp.dropped_sq, policy);
        Ok((discarded, k))
    }

    /// Applies an 8×8 gate to sites `(first, first + 1, first + 2)`.
    pub fn apply_three_site_gate(
        &mut self,
        first: usize,
        gate: &Array2<C64>,
        policy: &TruncationPolicy,
        sweep: Sweep,
    ) -> Result<GateReport> {
        if first + 2 >= self.len() {
            return Err(Error::InvalidArgument(format!("sites {first}..{} outside the chain", first + 3)));
        }
        if gate.dim() != (8, 8) {
            return Err(Error::InvalidArgument(format!("three-site gate must be 8x8, got {:?}", gate.dim())));
        }
        self.ensure_center_within(first, first + 2)?;
        let scale_sq = (2.0 * self.log_norm_adjust).exp();
        let theta = act_on_middle(&self.merged(first, 3)?, gate)?;
        let (dl, _, dr) = theta.dim();
        let (dropped, total, kept, k);
        match sweep {
            Sweep::Right => {
                let m = theta.reshaped((dl * 2, 4 * dr))?;
                let a = split(&m, policy, Sweep::Right)?;
                let k1 = a.left.ncols();
                self.tensors[first] = a.left.reshaped((dl, 2, k1))?;
                let rest = a.right.reshaped((k1 * 2, 2 * dr))?;
                let b = split(&rest, policy, Sweep::Right)?;
                k = b.left.ncols();
                self.tensors[first + 1] = b.left.reshaped((k1, 2, k))?;
                self.tensors[first + 2] = b.right.reshaped((k, 2, dr))?;
                self.center = Some(first + 2);
                dropped = a.dropped_sq + b.dropped_sq;
                total = a.total_sq;
                kept = b.kept_sq;
            }
            Sweep::Left => {
                let m = theta.reshaped((dl * 4, 2 * dr))?;
                let a = split(&m, policy, Sweep::Left)?;
                let k1 = a.left.ncols();
                self.tensors[first + 2] = a.right.reshaped((k1, 2, dr))?;
                let rest = a.left.reshaped((dl * 2, 2 * k1))?;
                let b = split(&rest, policy, Sweep::Left)?;
                k = b.left.ncols();
                self.tensors[first] = b.left.reshaped((dl, 2, k))?;
                self.tensors[first + 1] = b.right.reshaped((k, 2, k1))?;
                self.center = Some(first);
                dropped = a.dropped_sq + b.dropped_sq;
                total = a.total_sq;
                kept = b.kept_sq;
            }
        }
        let discarded = self.settle(scale_sq, total, kept, dropped, policy);
        Ok(GateReport {
            discarded_weight: discarded,
            bond_dim: k,
            non_unitary: unitarity_defect(gate) > 1e-10,
        })
    }

    /// Compresses every bond under `policy`; returns the absolute discarded weight.
    /// The center ends at site 0.
    pub fn truncate(&mut self, policy: &TruncationPolicy) -> Result<f64> {
        let l = self.len();
        self.canonicalize(l - 1)?;
        let scale_sq = (2.0 * self.log_norm_adjust).exp();
        let start_sq = frobenius_sq(self.tensors[l - 1].iter());
        let mut dropped = 0.0;
        let mut kept_sq = start_sq;
        for n in (1..l).rev() {
            let (dl, d, dr) = self.tensors[n].dim();
            let m = self.tensors[n].to_shape((dl, d * dr))?.to_owned();
            let sp = split(&m, policy, Sweep::Left)?;
            let k = sp.left.ncols();
            dropped += sp.dropped_sq;
            kept_sq = sp.kept_sq;
            self.tensors[n] = sp.right.reshaped((k, d, dr))?;
            let (dl0, d0, _) = self.tensors[n - 1].dim();
            let prev = self.tensors[n - 1].to_shape((dl0 * d0, dl))?.to_owned();
            self.tensors[n - 1] = prev.dot(&sp.left).reshaped((dl0, d0, k))?;
        }
        self.center = Some(0);
        Ok(self.settle(scale_sq, start_sq, kept_sq, dropped, policy))
    }

    /// Exact application of an MPO with tensors `(w_left, w_right, out, in)`.
    /// Bond dimensions multiply; the result has no canonical center.
    pub fn mpo_applied(&self, mpo: &[Array4<C64>]) -> Result<MatrixProductState> {
        if mpo.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: mpo.len(),
                right: self.len(),
            });
        }
        let mut out = Vec::with_capacity(self.len());
        for (n, (w, a)) in mpo.iter().zip(self.tensors.iter()).enumerate() {
            let (wl, wr, d_out, d_in) = w.dim();
            let (dl, d, dr) = a.dim();
            if d_in != d || d_out != 2 {
                return Err(Error::Structure(format!("MPO site {n} has physical dims {d_out}x{d_in}")));
            }
            let mut b = Array3::<C64>::zeros((dl * wl, d_out, dr * wr));
            for x in 0..wl {
                for y in 0..wr {
                    for so in 0..d_out {
                        for si in 0..d_in {
                            let c = w[[x, y, so, si]];
                            if c.norm() == 0.0 {
                                continue;
                            }
                            let src = a.index_axis(Axis(1), si);
                            for i in 0..dl {
                                for j in 0..dr {
                                    b[[i * wl + x, so, j * wr + y]] += c * src[[i, j]];
                                }
                            }
                        }
                    }
                }
            }
            out.push(b);
        }
        if out[0].dim().0 != 1 || out[out.len() - 1].dim().2 != 1 {
            return Err(Error::Structure("MPO boundary bonds must have dimension 1".into()));
        }
        MatrixProductState::from_tensors(out, None, self.log_norm_adjust)
    }

    /// [`Self::mpo_applied`] followed by compression under `policy`. Returns the
    /// discarded weight.
    pub fn apply_mpo(&mut self, mpo: &[Array4<C64>], policy: &TruncationPolicy) -> Result<f64> {
        *self = self.mpo_applied(mpo)?;
        self.truncate(policy)
    }
}
