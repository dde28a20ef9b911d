//! Tilted-field Ising chain with open boundaries,
//! `H = -Σ Z_n Z_{n+1} - g_x Σ X_n - g_z Σ Z_n`.

use ndarray::{s, Array1, Array2, Array4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, kron, ONE, ZERO};
use crate::mps::MatrixProductState;

/// Largest chain for which a dense `2^L × 2^L` Hamiltonian is built.
pub const DENSE_MATRIX_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingCouplings {
    pub g_x: f64,
    pub g_z: f64,
    pub length: usize,
}

impl Default for IsingCouplings {
    fn default() -> Self {
        Self {
            g_x: 1.25,
            g_z: 0.15,
            length: 400,
        }
    }
}

/// `H_n = -(zz_left Z_{n-1} Z_n + zz_right Z_n Z_{n+1} + x X_n + z Z_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTerm {
    pub site: usize,
    pub zz_left: f64,
    pub zz_right: f64,
    pub x: f64,
    pub z: f64,
}

fn pauli_x() -> Array2<C64> {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}

fn pauli_z() -> Array2<C64> {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, ONE))
}

impl IsingCouplings {
    pub fn new(g_x: f64, g_z: f64, length: usize) -> Result<Self> {
        let c = Self { g_x, g_z, length };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g_x.is_finite() || !self.g_z.is_finite() {
            return Err(Error::InvalidArgument("couplings must be finite".into()));
        }
        if self.length < 4 {
            return Err(Error::InvalidArgument(format!(
                "lattice length must be at least 4, got {}",
                self.length
            )));
        }
        Ok(())
    }

    pub fn with_length(self, length: usize) -> Self {
        Self { length, ..self }
    }

    pub fn local_energy_terms(&self) -> Vec<LocalTerm> {
        let l = self.length;
        (0..l)
            .map(|n| LocalTerm {
                site: n,
                zz_left: if n > 0 { 0.5 } else { 0.0 },
                zz_right: if n + 1 < l { 0.5 } else { 0.0 },
                x: self.g_x,
                z: self.g_z,
            })
            .collect()
    }

    /// Share of site `n`'s field carried by each adjacent bond gate.
    fn field_weight(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.length {
            1.0
        } else {
            0.5
        }
    }

    /// `-Z Z - w_l h_l ⊗ 1 - w_r 1 ⊗ h_r` on bond `(bond, bond + 1)`; the bond
    /// terms sum to `H`.
    pub fn bond_hamiltonian(&self, bond: usize) -> Array2<C64> {
        let field = &pauli_x() * C64::from(self.g_x) + &pauli_z() * C64::from(self.g_z);
        let id = identity(2);
        let wl = C64::from(self.field_weight(bond));
        let wr = C64::from(self.field_weight(bond + 1));
        -(kron(&pauli_z(), &pauli_z()) + kron(&field, &id) * wl + kron(&id, &field) * wr)
    }

    /// Dense `H_n` for oracle tests.
    pub fn dense_local_term(&self, site: usize) -> Result<Array2<C64>> {
        let l = self.length;
        self.check_dense()?;
        let t = self.local_energy_terms()[site];
        let dim = 1usize << l;
        let mut h = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            let z = |n: usize| if i >> (l - 1 - n) & 1 == 0 { 1.0 } else { -1.0 };
            let mut diag = t.z * z(site);
            if site > 0 {
                diag += t.zz_left * z(site - 1) * z(site);
            }
            if site + 1 < l {
                diag += t.zz_right * z(site) * z(site + 1);
            }
            h[[i, i]] -= C64::from(diag);
            h[[i ^ (1 << (l - 1 - site)), i]] -= C64::from(t.x);
        }
        Ok(h)
    }

    fn check_dense(&self) -> Result<()> {
        if self.length > DENSE_MATRIX_LIMIT {
            return Err(Error::OracleLimit {
                len: self.length,
                limit: DENSE_MATRIX_LIMIT,
            });
        }
        Ok(())
    }

    pub fn dense_hamiltonian(&self) -> Result<Array2<C64>> {
        self.check_dense()?;
        let dim = 1usize << self.length;
        let mut h = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            h[[i, i]] = C64::from(self.diagonal_energy(i));
            for n in 0..self.length {
                h[[i ^ (1 << (self.length - 1 - n)), i]] -= C64::from(self.g_x);
            }
        }
        Ok(h)
    }

    /// Energy of computational basis state `i` (site 0 = most significant bit)
    /// under the diagonal part of `H`.
    pub fn diagonal_energy(&self, i: usize) -> f64 {
        let l = self.length;
        let z = |n: usize| if i >> (l - 1 - n) & 1 == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for n in 0..l {
            e -= self.g_z * z(n);
            if n + 1 < l {
                e -= z(n) * z(n + 1);
            }
        }
        e
    }

    /// Matrix-free `out = H v` on the full open chain.
    pub fn apply_dense(&self, v: &[C64], out: &mut [C64]) {
        let l = self.length;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = v[i] * self.diagonal_energy(i);
            for n in 0..l {
                acc -= v[i ^ (1 << (l - 1 - n))] * self.g_x;
            }
            *o = acc;
        }
    }

    /// Hamiltonian as an MPO with tensors `(w_left, w_right, out, in)` and bond
    /// dimension 3; index 2 is the "nothing placed yet" state and 0 "done".
    pub fn mpo(&self) -> Vec<Array4<C64>> {
        let l = self.length;
        let id = identity(2);
        let z = pauli_z();
        let field = -(&pauli_x() * C64::from(self.g_x) + &z * C64::from(self.g_z));
        let mut bulk = Array4::<C64>::zeros((3, 3, 2, 2));
        let mut put = |a: usize, b: usize, m: &Array2<C64>| bulk.slice_mut(s![a, b, .., ..]).assign(m);
        put(0, 0, &id);
        put(1, 0, &z);
        put(2, 0, &field);
        put(2, 1, &(-&z));
        put(2, 2, &id);
        (0..l)
            .map(|n| {
                let rows = if n == 0 { 2..3 } else { 0..3 };
                let cols = if n + 1 == l { 0..1 } else { 0..3 };
                bulk.slice(s![rows, cols, .., ..]).to_owned()
            })
            .collect()
    }

    /// Unnormalized `<ψ|H_n|ψ>` for every site.
    pub fn local_energies(&self, state: &MatrixProductState) -> Result<Vec<f64>> {
        if state.len() != self.length {
            return Err(Error::LengthMismatch {
                left: state.len(),
                right: self.length,
            });
        }
        let ex = state.local_expectations();
        Ok(self
            .local_energy_terms()
            .iter()
            .map(|t| {
                let n = t.site;
                let mut e = t.x * ex.x[n] + t.z * ex.z[n];
                if n > 0 {
                    e += t.zz_left * ex.zz[n - 1];
                }
                if n + 1 < self.length {
                    e += t.zz_right * ex.zz[n];
                }
                -e
            })
            .collect())
    }

    /// `E_n = <ψ|H_n|ψ> - <ψ|ψ> <vac|H_n|vac>`, with the vacuum normalized. For a
    /// normalized state this is the usual vacuum-subtracted density; for an
    /// unnormalized one every entry scales with the squared norm.
    pub fn energy_density(&self, state: &MatrixProductState, vacuum: &MatrixProductState) -> Result<Vec<f64>> {
        let vac = self.vacuum_profile(vacuum)?;
        self.energy_density_against(state, &vac)
    }

    /// Normalized per-site vacuum energies, reusable across many snapshots.
    pub fn vacuum_profile(&self, vacuum: &MatrixProductState) -> Result<Vec<f64>> {
        let v = self.local_energies(vacuum)?;
        let nv = vacuum.norm_sq();
        if nv == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(v.into_iter().map(|e| e / nv).collect())
    }

    pub fn energy_density_against(&self, state: &MatrixProductState, vacuum_profile: &[f64]) -> Result<Vec<f64>> {
        if vacuum_profile.len() != self.length {
            return Err(Error::LengthMismatch {
                left: vacuum_profile.len(),
                right: self.length,
            });
        }
        let e = self.local_energies(state)?;
        let ns = state.norm_sq();
        Ok(e.iter().zip(vacuum_profile).map(|(a, b)| a - ns * b).collect())
    }

    /// `<ψ|H|ψ> / <ψ|ψ>`.
    pub fn total_energy(&self, state: &MatrixProductState) -> Result<f64> {
        let ns = state.norm_sq();
        if ns == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.local_energies(state)?.iter().sum::<f64>() / ns)
    }
}

/// Duration of one layer relative to the step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    Full,
    Half,
}

/// All bonds of one parity (`0` = even bonds, `1` = odd bonds) over one span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub parity: usize,
    pub span: Span,
}

/// Trotter factors with the single-site fields folded into the bond gates.
///
/// Order 1 applies all even bonds then all odd bonds for `dt`. Order 2 applies
/// even bonds for `dt/2`, odd bonds for `dt`, and even bonds for `dt/2`.
#[derive(Debug, Clone)]
pub struct TrotterGateSet {
    pub dt: f64,
    pub order: u8,
    pub imaginary_time: bool,
    /// Gate for bond `b` over a full step.
    pub full: Vec<Array2<C64>>,
    /// Gate for bond `b` over half a step (only used at order 2).
    pub half: Vec<Array2<C64>>,
    reversed: bool,
}

impl TrotterGateSet {
    pub fn bonds(&self) -> usize {
        self.full.len()
    }

    pub fn gate(&self, bond: usize, span: Span) -> &Array2<C64> {
        match span {
            Span::Full => &self.full[bond],
            Span::Half => &self.half[bond],
        }
    }

    /// Layers of one step in application order.
    pub fn layers(&self) -> Vec<Layer> {
        let mut l = match self.order {
            1 => vec![
                Layer { parity: 0, span: Span::Full },
                Layer { parity: 1, span: Span::Full },
            ],
            _ => vec![
                Layer { parity: 0, span: Span::Half },
                Layer { parity: 1, span: Span::Full },
                Layer { parity: 0, span: Span::Half },
            ],
        };
        if self.reversed {
            l.reverse();
        }
        l
    }

    /// Ordered list of `(bond, gate)` factors realizing one step.
    pub fn sequence(&self) -> Vec<(usize, &Array2<C64>)> {
        self.layers()
            .into_iter()
            .flat_map(|layer| (layer.parity..self.bonds()).step_by(2).map(move |b| (b, self.gate(b, layer.span))))
            .collect()
    }

    /// The step that undoes this one: adjoint gates in reverse order.
    pub fn inverse(&self) -> Self {
        let adj = |v: &Vec<Array2<C64>>| v.iter().map(|g| g.t().mapv(|x| x.conj())).collect();
        Self {
            dt: self.dt,
            order: self.order,
            imaginary_time: self.imaginary_time,
            full: adj(&self.full),
            half: adj(&self.half),
            reversed: !self.reversed,
        }
    }
}

pub fn build_trotter_gates(couplings: &IsingCouplings, dt: f64, order: u8, imaginary_time: bool) -> Result<TrotterGateSet> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if order != 1 && order != 2 {
        return Err(Error::InvalidArgument(format!("Trotter order must be 1 or 2, got {order}")));
    }
    let factor = |tau: f64| {
        if imaginary_time {
            C64::new(-tau, 0.0)
        } else {
            C64::new(0.0, -tau)
        }
    };
    let bonds = couplings.length - 1;
    let mut full = Vec::with_capacity(bonds);
    let mut half = Vec::with_capacity(bonds);
    for b in 0..bonds {
        let h = couplings.bond_hamiltonian(b);
        full.push(expm_hermitian(&h, factor(dt))?);
        if order == 2 {
            half.push(expm_hermitian(&h, factor(dt / 2.0))?);
        }
    }
    Ok(TrotterGateSet {
        dt,
        order,
        imaginary_time,
        full,
        half,
        reversed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use ndarray_linalg::Eigh;

    fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn field_free_bulk_terms() {
        let c = IsingCouplings::new(0.0, 0.0, 4).unwrap();
        let t = c.local_energy_terms();
        for n in 1..3 {
            assert_eq!((t[n].zz_left, t[n].zz_right, t[n].x, t[n].z), (0.5, 0.5, 0.0, 0.0));
        }
        assert_eq!(t[0].zz_left, 0.0);
        assert_eq!(t[3].zz_right, 0.0);
    }

    #[test]
    fn local_terms_and_bond_terms_sum_to_hamiltonian() {
        for l in 4..=8 {
            let c = IsingCouplings::new(1.25, 0.15, l).unwrap();
            let h = c.dense_hamiltonian().unwrap();
            assert_eq!(max_abs_diff(&h, &h.t().mapv(|x| x.conj())), 0.0);
            let mut sum = Array2::zeros(h.dim());
            for n in 0..l {
                sum += &c.dense_local_term(n).unwrap();
            }
            assert!(max_abs_diff(&h, &sum) < 1e-12);
            let mut bonds = Array2::zeros(h.dim());
            for b in 0..l - 1 {
                let left = identity(1 << b);
                let right = identity(1 << (l - b - 2));
                bonds += &kron(&kron(&left, &c.bond_hamiltonian(b)), &right);
            }
            assert!(max_abs_diff(&h, &bonds) < 1e-12);
        }
    }

    #[test]
    fn matrix_free_application_matches_dense() {
        let c = IsingCouplings::new(0.7, -0.3, 6).unwrap();
        let h = c.dense_hamiltonian().unwrap();
        let v: Vec<C64> = (0..64).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut out = vec![ZERO; 64];
        c.apply_dense(&v, &mut out);
        let expect = h.dot(&Array1::from(v));
        assert!(out.iter().zip(expect.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn all_up_energy() {
        let c = IsingCouplings::new(1.25, 0.15, 10).unwrap();
        let psi = MatrixProductState::all_up(10);
        let e = c.total_energy(&psi).unwrap();
        assert!((e - (-(9.0) - 10.0 * 0.15)).abs() < 1e-12);
    }

    #[test]
    fn local_energies_match_dense_terms() {
        let c = IsingCouplings::new(1.25, 0.15, 6).unwrap();
        let mut psi = crate::mps::testutil::random_mps(6, 4, 9);
        psi.normalize().unwrap();
        let v = psi.to_dense(14).unwrap();
        let e = c.local_energies(&psi).unwrap();
        for n in 0..6 {
            let hn = c.dense_local_term(n).unwrap();
            let exact = v.mapv(|x| x.conj()).dot(&hn.dot(&v));
            assert!((exact.re - e[n]).abs() < 1e-12);
            assert!(exact.im.abs() < 1e-12);
        }
    }

    #[test]
    fn single_flip_energy_in_classical_limit() {
        let l = 9;
        let m = 4;
        let c = IsingCouplings::new(0.0, 0.15, l).unwrap();
        let vac = MatrixProductState::all_up(l);
        let mut spins = vec![0u8; l];
        spins[m] = 1;
        let psi = MatrixProductState::basis_state(&spins).unwrap();
        let e = c.energy_density(&psi, &vac).unwrap();
        // two broken bonds at 2 each plus the field cost
        let total: f64 = e.iter().sum();
        assert!((total - (4.0 + 2.0 * 0.15)).abs() < 1e-12);
        for (n, en) in e.iter().enumerate() {
            if n + 1 < m || n > m + 1 {
                assert!(en.abs() < 1e-14);
            }
        }
        assert!(c.energy_density(&vac, &vac).unwrap().iter().all(|x| x.abs() < 1e-14));
        spins[m] = 0;
        spins[0] = 1;
        let edge = MatrixProductState::basis_state(&spins).unwrap();
        let total: f64 = c.energy_density(&edge, &vac).unwrap().iter().sum();
        assert!((total - (2.0 + 2.0 * 0.15)).abs() < 1e-12);
    }

    #[test]
    fn gates_approach_identity_and_are_unitary() {
        let c = IsingCouplings::default().with_length(6);
        let g = build_trotter_gates(&c, 1e-6, 2, false).unwrap();
        for gate in &g.full {
            assert!(unitarity_defect(gate) < 1e-12);
            assert!(max_abs_diff(gate, &identity(4)) < 1e-5);
        }
        assert!(build_trotter_gates(&c, 0.1, 3, false).is_err());
        assert!(build_trotter_gates(&c, 0.0, 2, false).is_err());
    }

    #[test]
    fn order_two_sequence_is_palindromic() {
        let c = IsingCouplings::default().with_length(7);
        let g = build_trotter_gates(&c, 0.1, 2, false).unwrap();
        let bonds: Vec<usize> = g.sequence().iter().map(|(b, _)| *b).collect();
        let mut rev = bonds.clone();
        rev.reverse();
        let evens: Vec<usize> = bonds.iter().copied().filter(|b| b % 2 == 0).collect();
        assert_eq!(evens.len(), 2 * 3);
        let mut sorted_a = bonds.clone();
        let mut sorted_b = rev;
        sorted_a.sort();
        sorted_b.sort();
        assert_eq!(sorted_a, sorted_b);
        // first and last blocks are the same half-step even layer
        assert_eq!(&bonds[..3], &[0, 2, 4]);
        assert_eq!(&bonds[bonds.len() - 3..], &[0, 2, 4]);
    }

    #[test]
    fn imaginary_gates_are_hermitian_contractions() {
        let c = IsingCouplings::default().with_length(5);
        let g = build_trotter_gates(&c, 0.05, 1, true).unwrap();
        let (w, _) = g.full[1].eigh(ndarray_linalg::UPLO::Lower).unwrap();
        assert!(w.iter().all(|&x| x > 0.0));
    }
}
