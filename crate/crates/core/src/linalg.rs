//! Dense kernels shared by the MPS, DMRG and exact-diagonalization code.

use ndarray::{s, Array, Array1, Array2, ArrayView2, Axis, Dimension, ShapeArg};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, SVD, UPLO};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Row-major reshape that copies only when the input is not in standard layout.
pub trait Reshape<D: Dimension> {
    fn reshaped<E: ShapeArg>(self, shape: E) -> Result<Array<C64, E::Dim>>;
}

impl<D: Dimension> Reshape<D> for Array<C64, D> {
    fn reshaped<E: ShapeArg>(self, shape: E) -> Result<Array<C64, E::Dim>> {
        let a = if self.is_standard_layout() {
            self
        } else {
            self.as_standard_layout().into_owned()
        };
        Ok(a.into_shape_with_order(shape)?)
    }
}

/// Thin SVD `m = u · diag(s) · vt` with singular values in descending order.
///
/// Falls back from the divide-and-conquer driver to the QR-iteration driver
/// when the former fails to converge.
pub fn svd(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    if let Ok((Some(u), s, Some(vt))) = m.svddc(JobSvd::Some) {
        return Ok((u, s, vt));
    }
    let (u, s, vt) = m.svd(true, true)?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let k = s.len();
    Ok((
        u.slice(s![.., ..k]).to_owned(),
        s,
        vt.slice(s![..k, ..]).to_owned(),
    ))
}

/// Number of singular values kept under a bond cap and a relative
/// discarded-weight cutoff, together with the discarded squared weight
/// (absolute, in units of the input's squared singular values).
///
/// Exact zeros are always dropped, but at least one value is kept.
pub fn truncation_rank(s: &[f64], max_bond: usize, cutoff: f64) -> (usize, f64) {
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut keep = s.len();
    let mut dropped = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if w == 0.0 || (total > 0.0 && (dropped + w) / total <= cutoff) {
            dropped += w;
            keep -= 1;
        } else {
            break;
        }
    }
    while keep > max_bond.max(1) {
        dropped += s[keep - 1] * s[keep - 1];
        keep -= 1;
    }
    (keep, dropped)
}

/// `exp(factor · h)` for Hermitian `h`.
pub fn expm_hermitian(h: &Array2<C64>, factor: C64) -> Result<Array2<C64>> {
    let (vals, vecs) = h.eigh(UPLO::Upper)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let f = (factor * vals[j]).exp();
        scaled.column_mut(j).mapv_inplace(|x| x * f);
    }
    Ok(scaled.dot(&adjoint(&vecs.view())))
}

pub fn adjoint(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

/// Kronecker product of two square operators, first factor most significant.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|x| x * aij));
        }
    }
    out
}

/// Largest entry of `|g† g − 1|`.
pub fn unitarity_defect(g: &Array2<C64>) -> f64 {
    let p = adjoint(&g.view()).dot(g);
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[[i, j]] - target).norm());
        }
    }
    worst
}

pub fn frobenius_sq<'a>(it: impl IntoIterator<Item = &'a C64>) -> f64 {
    it.into_iter().map(|x| x.norm_sqr()).sum()
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub nev: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            nev: 1,
            tol: 1e-10,
            max_iter: 400,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

struct Krylov {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Krylov {
    fn ritz(&self) -> Result<(Array1<f64>, Array2<f64>)> {
        let m = self.alpha.len();
        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = self.alpha[i];
            if i + 1 < m {
                t[[i, i + 1]] = self.beta[i];
                t[[i + 1, i]] = self.beta[i];
            }
        }
        Ok(t.eigh(UPLO::Upper)?)
    }
}

/// Hermitian Lanczos with full reorthogonalization.
///
/// Returns the Krylov data once the lowest `nev` Ritz pairs have residual
/// below `tol`, the space is exhausted, or `max_iter` is hit (the latter is
/// an error).
fn lanczos<F>(dim: usize, mut apply: F, start: Vec<C64>, opts: &LanczosOptions) -> Result<Krylov>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let mut v = start;
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(Error::InvalidArgument("Lanczos start vector is zero".into()));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut k = Krylov {
        basis: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
    };
    let mut w = vec![ZERO; dim];
    let max_iter = opts.max_iter.min(dim);
    loop {
        apply(&v, &mut w);
        let a = dot(&v, &w).re;
        k.basis.push(v.clone());
        k.alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &k.basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = norm(&w);
        let m = k.alpha.len();
        let check = m >= opts.nev && (m % 8 == 0 || bnorm < 1e-12 || m == max_iter);
        if check {
            let (vals, vecs) = k.ritz()?;
            let want = opts.nev.min(m);
            let converged = (0..want).all(|i| {
                bnorm * vecs[[m - 1, i]].abs() <= opts.tol * vals[i].abs().max(1.0)
            });
            if converged || bnorm < 1e-12 || m == dim {
                return Ok(k);
            }
            if m >= max_iter {
                return Err(Error::NoConvergence {
                    what: "Lanczos".into(),
                    detail: format!("{m} iterations, residual scale {bnorm:.3e}"),
                });
            }
        }
        k.beta.push(bnorm);
        v = w.iter().map(|x| x / bnorm).collect();
    }
}

fn random_start(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

/// Lowest `opts.nev` eigenvalues of a Hermitian operator given by its action.
pub fn lowest_eigenvalues<F>(dim: usize, apply: F, opts: &LanczosOptions) -> Result<Vec<f64>>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if dim == 0 {
        return Ok(Vec::new());
    }
    let k = lanczos(dim, apply, random_start(dim, opts.seed), opts)?;
    let (vals, _) = k.ritz()?;
    Ok(vals.iter().take(opts.nev).copied().collect())
}

/// Ground state (eigenvalue, normalized eigenvector) from a given start vector.
pub fn ground_state<F>(apply: F, start: Vec<C64>, opts: &LanczosOptions) -> Result<(f64, Vec<C64>)>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let dim = start.len();
    let start = if norm(&start) == 0.0 {
        random_start(dim, opts.seed)
    } else {
        start
    };
    let k = lanczos(dim, apply, start, opts)?;
    let (vals, vecs) = k.ritz()?;
    let mut out = vec![ZERO; dim];
    for (i, b) in k.basis.iter().enumerate() {
        let c = vecs[[i, 0]];
        out.iter_mut().zip(b).for_each(|(x, y)| *x += y * c);
    }
    let n = norm(&out);
    out.iter_mut().for_each(|x| *x /= n);
    Ok((vals[0], out))
}

/// Sum of `m` along an axis, used for reduced density matrices in tests.
pub fn row_norms_sq(m: &Array2<C64>) -> Array1<f64> {
    m.map(|x| x.norm_sqr()).sum_axis(Axis(1))
}
