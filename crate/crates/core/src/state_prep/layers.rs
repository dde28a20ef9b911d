//! Translationally invariant dressing layers built from the operator pool
//! `{Y; ZYZ; YZ+ZY; YX+XY; ZXY+YXZ}` summed over all sites of the open chain.
//!
//! Every pool operator contains exactly one `Y`. Layer angles follow the sign
//! convention of the tabulated dressing schedule, which corresponds to
//! `exp(-iθ O)` with the standard `Y = [[0, -i], [i, 0]]`; with that sign the
//! schedule maps the all-up state close to the interacting vacuum.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, kron, I, ONE, ZERO};
use crate::mps::{MatrixProductState, Sweep, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolOperator {
    /// `Σ Y_n`
    Y,
    /// `Σ Z_n Y_{n+1} Z_{n+2}`
    ZYZ,
    /// `Σ (Y_n Z_{n+1} + Z_n Y_{n+1})`
    YZ,
    /// `Σ (Y_n X_{n+1} + X_n Y_{n+1})`
    YX,
    /// `Σ (Z_n X_{n+1} Y_{n+2} + Y_n X_{n+1} Z_{n+2})`
    ZXY,
}

fn x() -> Array2<C64> {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}
fn y() -> Array2<C64> {
    ndarray::array![[ZERO, -I], [I, ZERO]]
}
fn z() -> Array2<C64> {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

impl PoolOperator {
    pub const ALL: [PoolOperator; 5] = [Self::Y, Self::ZYZ, Self::YZ, Self::YX, Self::ZXY];

    /// Number of consecutive sites one term acts on.
    pub fn range(self) -> usize {
        match self {
            Self::Y => 1,
            Self::YZ | Self::YX => 2,
            Self::ZYZ | Self::ZXY => 3,
        }
    }

    /// All terms of the sum mutually commute.
    pub fn commuting(self) -> bool {
        matches!(self, Self::Y | Self::ZYZ)
    }

    /// Matrix of the term starting at one site (row index: first site most significant).
    pub fn local_term(self) -> Array2<C64> {
        match self {
            Self::Y => y(),
            Self::ZYZ => kron(&kron(&z(), &y()), &z()),
            Self::YZ => kron(&y(), &z()) + kron(&z(), &y()),
            Self::YX => kron(&y(), &x()) + kron(&x(), &y()),
            Self::ZXY => kron(&kron(&z(), &x()), &y()) + kron(&kron(&y(), &x()), &z()),
        }
    }
}

impl fmt::Display for PoolOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Y => "Y",
            Self::ZYZ => "ZYZ",
            Self::YZ => "YZ",
            Self::YX => "YX",
            Self::ZXY => "ZXY",
        };
        f.write_str(s)
    }
}

impl FromStr for PoolOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unsupported pool operator `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub operator: PoolOperator,
    pub angle: f64,
}

/// Layers applied first to last, each as `exp(-i angle O)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalLayerSchedule {
    pub layers: Vec<Layer>,
}

impl VariationalLayerSchedule {
    /// Angles tuned for packets with `k = 0.36π`, `σ_k = 0.059π` at `g_x = 1.25`, `g_z = 0.15`.
    pub fn default_dressing() -> Self {
        use PoolOperator::*;
        let table = [
            (Y, 0.1212),
            (YZ, 0.0185),
            (Y, -0.5452),
            (ZXY, 0.0397),
            (YZ, 0.0599),
            (YZ, 0.0556),
            (Y, -0.2637),
            (ZYZ, 0.0566),
        ];
        Self {
            layers: table.iter().map(|&(operator, angle)| Layer { operator, angle }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.layers.iter().find(|l| !l.angle.is_finite()) {
            return Err(Error::InvalidArgument(format!("layer {} has a non-finite angle", l.operator)));
        }
        Ok(())
    }

    /// The schedule realizing the inverse unitary.
    pub fn inverse(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .rev()
                .map(|l| Layer {
                    operator: l.operator,
                    angle: -l.angle,
                })
                .collect(),
        }
    }
}

/// Applies `exp(-i θ Σ_n h_n)` for all terms of `op` lying inside the chain. Terms
/// are grouped by their first site modulo the range; groups are combined with a
/// symmetric splitting over `substeps` slices. Returns the discarded weight.
pub fn apply_pool_exponential(
    state: &mut MatrixProductState,
    op: PoolOperator,
    theta: f64,
    substeps: usize,
    policy: &TruncationPolicy,
) -> Result<f64> {
    if theta == 0.0 {
        return Ok(0.0);
    }
    let r = op.range();
    if state.len() < r {
        return Ok(0.0);
    }
    let substeps = if op.commuting() { 1 } else { substeps.max(1) };
    let tau = theta / substeps as f64;
    let mut plan: Vec<(usize, f64)> = Vec::new();
    let push = |g: usize, f: f64, plan: &mut Vec<(usize, f64)>| match plan.last_mut() {
        Some(last) if last.0 == g => last.1 += f,
        _ => plan.push((g, f)),
    };
    for _ in 0..substeps {
        if op.commuting() || r == 1 {
            for g in 0..r {
                push(g, tau, &mut plan);
            }
        } else {
            for g in 0..r - 1 {
                push(g, tau / 2.0, &mut plan);
            }
            push(r - 1, tau, &mut plan);
            for g in (0..r - 1).rev() {
                push(g, tau / 2.0, &mut plan);
            }
        }
    }
    let h = op.local_term();
    let mut discarded = 0.0;
    let mut cache: Vec<(f64, Array2<C64>)> = Vec::new();
    for (g, t) in plan {
        let gate = match cache.iter().find(|(tt, _)| *tt == t) {
            Some((_, m)) => m.clone(),
            None => {
                let m = expm_hermitian(&h, C64::new(0.0, -t))?;
                cache.push((t, m.clone()));
                m
            }
        };
        discarded += apply_group(state, &gate, r, g, policy)?;
    }
    Ok(discarded)
}

fn apply_group(state: &mut MatrixProductState, gate: &Array2<C64>, r: usize, group: usize, policy: &TruncationPolicy) -> Result<f64> {
    let l = state.len();
    let starts: Vec<usize> = (group..=l - r).step_by(r).collect();
    if starts.is_empty() {
        return Ok(0.0);
    }
    if r == 1 {
        for &n in &starts {
            state.apply_one_site(n, gate)?;
        }
        return Ok(0.0);
    }
    let center = state.center().unwrap_or(0);
    let first = starts[0];
    let last = *starts.last().unwrap() + r - 1;
    let rightward = center.abs_diff(first) <= center.abs_diff(last);
    let order: Vec<usize> = if rightward { starts } else { starts.into_iter().rev().collect() };
    let sweep = if rightward { Sweep::Right } else { Sweep::Left };
    let mut discarded = 0.0;
    for n in order {
        let rep = match r {
            2 => state.apply_two_site_gate(n, gate, policy, sweep)?,
            _ => state.apply_three_site_gate(n, gate, policy, sweep)?,
        };
        discarded += rep.discarded_weight;
    }
    Ok(discarded)
}

/// Applies every layer of `schedule` in order. Returns the discarded weight.
pub fn apply_variational_layers(
    state: &mut MatrixProductState,
    schedule: &VariationalLayerSchedule,
    substeps: usize,
    policy: &TruncationPolicy,
) -> Result<f64> {
    schedule.validate()?;
    let mut discarded = 0.0;
    for layer in &schedule.layers {
        discarded += apply_pool_exponential(state, layer.operator, layer.angle, substeps, policy)?;
    }
    Ok(discarded)
}

/// Dense `Σ_n h_n` over the open chain, for oracle tests.
#[cfg(test)]
pub(crate) fn dense_pool_sum(op: PoolOperator, length: usize) -> Array2<C64> {
    let r = op.range();
    let dim = 1usize << length;
    let mut out = Array2::<C64>::zeros((dim, dim));
    let id = |n: usize| Array2::from_diag(&ndarray::Array1::from_elem(1usize << n, ONE));
    for n in 0..=length - r {
        out += &kron(&kron(&id(n), &op.local_term()), &id(length - n - r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::testutil::random_mps;

    fn fidelity(a: &ndarray::Array1<C64>, b: &ndarray::Array1<C64>) -> f64 {
        let ov: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
        ov.norm_sqr() / (na * nb)
    }

    #[test]
    fn pool_terms_are_hermitian() {
        for op in PoolOperator::ALL {
            let h = op.local_term();
            let diff = &h - &h.t().mapv(|v| v.conj());
            assert!(diff.iter().all(|v| v.norm() == 0.0), "{op}");
            assert_eq!(op.to_string().parse::<PoolOperator>().unwrap(), op);
        }
        assert!("XYZ".parse::<PoolOperator>().is_err());
    }

    #[test]
    fn zero_angles_are_identity() {
        let mut psi = random_mps(6, 4, 1);
        psi.normalize().unwrap();
        let before = psi.to_dense(14).unwrap();
        let mut sched = VariationalLayerSchedule::default_dressing();
        for l in &mut sched.layers {
            l.angle = 0.0;
        }
        apply_variational_layers(&mut psi, &sched, 8, &TruncationPolicy::exact()).unwrap();
        let after = psi.to_dense(14).unwrap();
        assert!(before.iter().zip(after.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn single_layers_match_dense_exponentials() {
        let l = 8;
        for (op, theta) in [(PoolOperator::Y, -0.5452), (PoolOperator::ZYZ, 0.0566), (PoolOperator::YZ, 0.0599), (PoolOperator::YX, 0.08), (PoolOperator::ZXY, 0.0397)] {
            let mut psi = random_mps(l, 6, 5);
            psi.normalize().unwrap();
            let start = psi.to_dense(14).unwrap();
            apply_pool_exponential(&mut psi, op, theta, 16, &TruncationPolicy::exact()).unwrap();
            let u = expm_hermitian(&dense_pool_sum(op, l), C64::new(0.0, -theta)).unwrap();
            let f = fidelity(&u.dot(&start), &psi.to_dense(14).unwrap());
            assert!(f >= 1.0 - 1e-8, "{op}: fidelity {f}");
        }
    }

    #[test]
    fn default_schedule_maps_all_up_near_vacuum() {
        let c = crate::ising::IsingCouplings::default().with_length(24);
        let vac = crate::state_prep::prepare_vacuum(&c, &Default::default()).unwrap();
        let mut psi = MatrixProductState::all_up(24);
        let policy = TruncationPolicy::new(32, 1e-12).unwrap();
        apply_variational_layers(&mut psi, &VariationalLayerSchedule::default_dressing(), 8, &policy).unwrap();
        let overlap = crate::mps::inner_product(&psi, &vac.state).unwrap().norm();
        assert!(overlap > 0.99, "overlap {overlap}");
    }

    #[test]
    fn inverse_schedule_undoes_layers() {
        let mut psi = random_mps(7, 4, 2);
        psi.normalize().unwrap();
        let start = psi.to_dense(14).unwrap();
        let sched = VariationalLayerSchedule::default_dressing();
        apply_variational_layers(&mut psi, &sched, 4, &TruncationPolicy::exact()).unwrap();
        apply_variational_layers(&mut psi, &sched.inverse(), 4, &TruncationPolicy::exact()).unwrap();
        assert!(fidelity(&start, &psi.to_dense(14).unwrap()) > 1.0 - 1e-12);
    }
}
