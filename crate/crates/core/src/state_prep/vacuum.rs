//! Two-site DMRG for the interacting vacuum.

use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ising::IsingCouplings;
use crate::linalg::{ground_state, LanczosOptions, Reshape, ONE};
use crate::mps::{inner_product, MatrixProductState, Sweep, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumOptions {
    pub policy: TruncationPolicy,
    pub max_sweeps: usize,
    /// Convergence when `<H^2> - <H>^2` falls below this value.
    pub variance_tol: f64,
    pub seed: u64,
}

impl Default for VacuumOptions {
    fn default() -> Self {
        Self {
            policy: TruncationPolicy {
                max_bond: 128,
                cutoff: 1e-14,
                renormalize_after_truncation: true,
            },
            max_sweeps: 40,
            variance_tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vacuum {
    pub state: MatrixProductState,
    pub energy: f64,
    pub variance: f64,
    pub sweeps: usize,
}

/// Environment `(bra bond, mpo bond, ket bond)` extended by one site to the right.
fn grow_left(env: &Array3<C64>, a: &Array3<C64>, w: &Array4<C64>) -> Result<Array3<C64>> {
    let (bl, wl, kl) = env.dim();
    let (_, d, kr) = a.dim();
    let (_, wr, _, _) = w.dim();
    // x1[b, w, t, kr] = env[b, w, k] a[k, t, kr]
    let x1 = env.to_shape((bl * wl, kl))?.dot(&a.to_shape((kl, d * kr))?);
    let x1 = x1.reshaped((bl, wl, d, kr))?.permuted_axes([0, 3, 1, 2]);
    let x1 = x1.as_standard_layout().to_shape((bl * kr, wl * d))?.to_owned();
    // wm[(w, t), (w', s)]
    let wm = w.view().permuted_axes([0, 3, 1, 2]);
    let wm = wm.as_standard_layout().to_shape((wl * d, wr * d))?.to_owned();
    let x2 = x1.dot(&wm).reshaped((bl, kr, wr, d))?.permuted_axes([0, 3, 1, 2]);
    let x2 = x2.as_standard_layout().to_shape((bl * d, kr * wr))?.to_owned();
    let ac = a.mapv(|x| x.conj()).reshaped((bl * d, a.dim().2))?;
    let out = ac.t().dot(&x2).reshaped((a.dim().2, kr, wr))?.permuted_axes([0, 2, 1]);
    Ok(out.as_standard_layout().into_owned())
}

/// Environment extended by one site to the left.
fn grow_right(env: &Array3<C64>, a: &Array3<C64>, w: &Array4<C64>) -> Result<Array3<C64>> {
    let flip = |x: &Array3<C64>| x.view().permuted_axes([2, 1, 0]).as_standard_layout().into_owned();
    let wf = w.view().permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned();
    grow_left(env, &flip(a), &wf)
}

/// `H_eff θ` for a two-site block `θ[(a, s1, s2, b)]`.
struct TwoSiteOperator<'a> {
    left: &'a Array3<C64>,
    w1: &'a Array4<C64>,
    w2: &'a Array4<C64>,
    right: &'a Array3<C64>,
}

impl TwoSiteOperator<'_> {
    fn apply(&self, theta: &[C64], out: &mut [C64]) {
        let (bl, wl, kl) = self.left.dim();
        let (br, wr, kr) = self.right.dim();
        let wm = self.w1.dim().1;
        let d = 2;
        let th = ndarray::ArrayView2::from_shape((kl, d * d * kr), theta).unwrap();
        // y1[b, w, s1 s2 kr]
        let y1 = self.left.to_shape((bl * wl, kl)).unwrap().dot(&th);
        let y1 = y1.reshaped((bl, wl, d, d * kr)).unwrap();
        // contract w and s1 with w1[w, w', t1, s1]
        let y1p = y1.permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
        let y1p = y1p.reshaped((bl * d * kr, wl * d)).unwrap();
        let w1m = self.w1.view().permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
        let w1m = w1m.reshaped((wl * d, wm * d)).unwrap();
        // y2[b, s2, kr, w', t1]
        let y2 = y1p.dot(&w1m).reshaped((bl, d, kr, wm, d)).unwrap();
        let y2p = y2.permuted_axes([0, 4, 2, 3, 1]).as_standard_layout().into_owned();
        let y2p = y2p.reshaped((bl * d * kr, wm * d)).unwrap();
        let w2m = self.w2.view().permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
        let w2m = w2m.reshaped((wm * d, wr * d)).unwrap();
        // y3[b, t1, kr, w'', t2]
        let y3 = y2p.dot(&w2m).reshaped((bl, d, kr, wr, d)).unwrap();
        let y3p = y3.permuted_axes([0, 1, 4, 3, 2]).as_standard_layout().into_owned();
        let y3p = y3p.reshaped((bl * d * d, wr * kr)).unwrap();
        let rm = self.right.view().permuted_axes([1, 2, 0]).as_standard_layout().into_owned();
        let rm = rm.reshaped((wr * kr, br)).unwrap();
        let res = y3p.dot(&rm);
        for (o, v) in out.iter_mut().zip(res.iter()) {
            *o = *v;
        }
    }
}

/// `<H>` and `<H^2> - <H>^2` of a state, both for the normalized state.
pub fn energy_and_variance(couplings: &IsingCouplings, state: &MatrixProductState) -> Result<(f64, f64)> {
    let ns = state.norm_sq();
    if ns == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let phi = state.mpo_applied(&couplings.mpo())?;
    let e = inner_product(state, &phi)?.re / ns;
    let h2 = inner_product(&phi, &phi)?.re / ns;
    Ok((e, (h2 - e * e).max(0.0)))
}

/// Ground state of the open chain by alternating two-site sweeps.
pub fn prepare_vacuum(couplings: &IsingCouplings, opts: &VacuumOptions) -> Result<Vacuum> {
    couplings.validate()?;
    opts.policy.validate()?;
    let l = couplings.length;
    let mpo = couplings.mpo();
    // slightly tilted product start so both spin sectors are represented
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sites: Vec<[C64; 2]> = (0..l)
        .map(|_| [ONE, C64::new(0.3 + 0.1 * rng.gen::<f64>(), 0.0)])
        .collect();
    let mut psi = MatrixProductState::from_site_amplitudes(&sites)?;
    psi.canonicalize(0)?;
    psi.normalize()?;

    let edge = Array3::from_elem((1, 1, 1), ONE);
    let mut lefts: Vec<Option<Array3<C64>>> = vec![None; l + 1];
    let mut rights: Vec<Option<Array3<C64>>> = vec![None; l + 1];
    lefts[0] = Some(edge.clone());
    rights[l] = Some(edge);
    for n in (1..l).rev() {
        let r = grow_right(rights[n + 1].as_ref().unwrap(), &psi.tensors()[n], &mpo[n])?;
        rights[n] = Some(r);
    }
    let lanczos = LanczosOptions {
        tol: 1e-12,
        max_iter: 200,
        ..LanczosOptions::default()
    };

    let mut history = Vec::new();
    for sweep in 1..=opts.max_sweeps {
        let mut energy = 0.0;
        for (bonds, dir) in [
            ((0..l - 1).collect::<Vec<_>>(), Sweep::Right),
            ((0..l - 1).rev().collect::<Vec<_>>(), Sweep::Left),
        ] {
            for b in bonds {
                let op = TwoSiteOperator {
                    left: lefts[b].as_ref().unwrap(),
                    w1: &mpo[b],
                    w2: &mpo[b + 1],
                    right: rights[b + 2].as_ref().unwrap(),
                };
                psi.canonicalize(b)?;
                let (dl, _, _) = psi.tensors()[b].dim();
                let dr = psi.tensors()[b + 1].dim().2;
                let theta = two_site_block(&psi, b)?;
                let (e, v) = ground_state(|x, y| op.apply(x, y), theta, &lanczos)?;
                energy = e;
                let m = Array2::from_shape_vec((dl * 2, 2 * dr), v)?;
                psi.replace_two_site_block(b, m, &opts.policy, dir)?;
                match dir {
                    Sweep::Right => {
                        lefts[b + 1] = Some(grow_left(lefts[b].as_ref().unwrap(), &psi.tensors()[b], &mpo[b])?);
                    }
                    Sweep::Left => {
                        rights[b + 1] = Some(grow_right(rights[b + 2].as_ref().unwrap(), &psi.tensors()[b + 1], &mpo[b + 1])?);
                    }
                }
            }
        }
        let (e, var) = energy_and_variance(couplings, &psi)?;
        history.push(e);
        log::debug!("vacuum sweep {sweep}: E = {e:.12}, var = {var:.3e}, Lanczos E = {energy:.12}");
        if var < opts.variance_tol {
            psi.normalize()?;
            return Ok(Vacuum {
                state: psi,
                energy: e,
                variance: var,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "vacuum sweeps".into(),
        detail: format!(
            "variance above {} after {} sweeps; last energies {:?}",
            opts.variance_tol,
            opts.max_sweeps,
            &history[history.len().saturating_sub(3)..]
        ),
    })
}

fn two_site_block(psi: &MatrixProductState, b: usize) -> Result<Vec<C64>> {
    let t = psi.tensors();
    let (dl, d, dm) = t[b].dim();
    let dr = t[b + 1].dim().2;
    let m = t[b].to_shape((dl * d, dm))?.dot(&t[b + 1].to_shape((dm, 2 * dr))?);
    Ok(m.iter().copied().collect())
}
