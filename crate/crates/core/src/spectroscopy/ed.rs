//! Exact diagonalization of the periodic chain in lattice-momentum sectors.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{lowest_eigenvalues, LanczosOptions, ZERO};

/// Largest periodic chain accepted by default.
pub const DEFAULT_ED_LIMIT: usize = 18;

/// Couplings of the periodic chain `-Σ Z_n Z_{n+1} - g_x Σ X_n - g_z Σ Z_n`,
/// with an optional sign flip on the bond closing the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingHamiltonian {
    pub g_x: f64,
    pub g_z: f64,
    pub length: usize,
    pub twisted: bool,
}

impl RingHamiltonian {
    pub fn new(g_x: f64, g_z: f64, length: usize) -> Result<Self> {
        if !(3..=30).contains(&length) {
            return Err(Error::InvalidArgument(format!("ring length {length} outside 3..=30")));
        }
        Ok(Self {
            g_x,
            g_z,
            length,
            twisted: false,
        })
    }

    pub fn twisted(self) -> Self {
        Self { twisted: true, ..self }
    }

    fn spin(s: u32, n: usize) -> f64 {
        if s >> n & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Diagonal (Z-basis) energy of configuration `s`; bit `n` set means site `n` is down.
    pub fn diagonal(&self, s: u32) -> f64 {
        let l = self.length;
        let mut e = 0.0;
        for n in 0..l {
            let zz = Self::spin(s, n) * Self::spin(s, (n + 1) % l);
            let sign = if self.twisted && n == l - 1 { -1.0 } else { 1.0 };
            e -= sign * zz + self.g_z * Self::spin(s, n);
        }
        e
    }

    /// `out = H v` on the full `2^L` space.
    pub fn apply_full(&self, v: &[C64], out: &mut [C64]) {
        let gx = C64::new(-self.g_x, 0.0);
        out.par_iter_mut().enumerate().for_each(|(s, o)| {
            let mut acc = v[s] * self.diagonal(s as u32);
            for n in 0..self.length {
                acc += gx * v[s ^ (1 << n)];
            }
            *o = acc;
        });
    }

    /// Lowest eigenvalue on the full space.
    pub fn ground_energy(&self, tol: f64) -> Result<f64> {
        let dim = 1usize << self.length;
        let opts = LanczosOptions {
            nev: 1,
            tol,
            max_iter: 300,
            ..Default::default()
        };
        let e = lowest_eigenvalues(dim, |v, o| self.apply_full(v, o), &opts)?;
        Ok(e[0])
    }
}

/// Translation-orbit bookkeeping for all `2^L` configurations.
struct Orbits {
    length: usize,
    /// Representative (smallest member) of each configuration's orbit.
    rep: Vec<u32>,
    /// Number of unit translations taking the representative to the configuration.
    shift: Vec<u8>,
    /// Orbit size of each configuration.
    period: Vec<u8>,
}

fn rotate(s: u32, l: usize) -> u32 {
    let mask = (1u32 << l) - 1;
    ((s << 1) | (s >> (l - 1))) & mask
}

impl Orbits {
    fn new(length: usize) -> Self {
        let dim = 1usize << length;
        let mut rep = vec![u32::MAX; dim];
        let mut shift = vec![0u8; dim];
        let mut period = vec![0u8; dim];
        for s in 0..dim as u32 {
            if rep[s as usize] != u32::MAX {
                continue;
            }
            // s is the smallest unvisited value, hence the representative
            let mut members = vec![s];
            let mut t = rotate(s, length);
            while t != s {
                members.push(t);
                t = rotate(t, length);
            }
            for (j, &m) in members.iter().enumerate() {
                rep[m as usize] = s;
                shift[m as usize] = j as u8;
                period[m as usize] = members.len() as u8;
            }
        }
        Self {
            length,
            rep,
            shift,
            period,
        }
    }
}

/// Sparse Hamiltonian block in one momentum sector `k = 2π m / L`.
pub struct MomentumSector {
    pub length: usize,
    pub momentum_index: i64,
    pub momentum: f64,
    reps: Vec<u32>,
    diag: Vec<f64>,
    rows: Vec<Vec<(u32, C64)>>,
}

impl MomentumSector {
    fn build(h: &RingHamiltonian, orbits: &Orbits, m: i64) -> Self {
        let l = h.length;
        let k = 2.0 * PI * m as f64 / l as f64;
        let allowed = |p: u8| ((m * p as i64).rem_euclid(l as i64)) == 0;
        let mut reps = Vec::new();
        let mut index = vec![u32::MAX; orbits.rep.len()];
        for s in 0..orbits.rep.len() as u32 {
            if orbits.rep[s as usize] == s && allowed(orbits.period[s as usize]) {
                index[s as usize] = reps.len() as u32;
                reps.push(s);
            }
        }
        let diag = reps.iter().map(|&r| h.diagonal(r)).collect();
        // |r,k> = R^{-1/2} Σ_j e^{-ikj} T^j |r>, T a unit translation;
        // <s',k| X_n |r,k> = e^{ik l} sqrt(R_r / R_s') when X_n r = T^l s'
        let rows = reps
            .par_iter()
            .map(|&r| {
                let pr = orbits.period[r as usize] as f64;
                let mut row: Vec<(u32, C64)> = Vec::with_capacity(l);
                for n in 0..l {
                    let s = (r ^ (1 << n)) as usize;
                    let target = index[orbits.rep[s] as usize];
                    if target == u32::MAX {
                        continue;
                    }
                    let ps = orbits.period[s] as f64;
                    let amp = C64::from_polar((pr / ps).sqrt() * -h.g_x, k * orbits.shift[s] as f64);
                    match row.iter_mut().find(|(t, _)| *t == target) {
                        Some((_, a)) => *a += amp,
                        None => row.push((target, amp)),
                    }
                }
                row
            })
            .collect();
        Self {
            length: l,
            momentum_index: m,
            momentum: k,
            reps,
            diag,
            rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    /// `out = H_k v`; rows store the images of each basis vector (a column of `H_k`).
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = ZERO);
        for (c, row) in self.rows.iter().enumerate() {
            out[c] += v[c] * self.diag[c];
            for &(t, a) in row {
                out[t as usize] += a * v[c];
            }
        }
    }

    pub fn lowest(&self, nev: usize, tol: f64) -> Result<Vec<f64>> {
        let opts = LanczosOptions {
            nev: nev.min(self.dim()),
            tol,
            max_iter: 600,
            ..Default::default()
        };
        lowest_eigenvalues(self.dim(), |v, o| self.apply(v, o), &opts).map_err(|e| match e {
            Error::NoConvergence { detail, .. } => Error::NoConvergence {
                what: format!("sector m = {} of L = {}", self.momentum_index, self.length),
                detail,
            },
            other => other,
        })
    }
}

/// Lowest levels in every momentum sector `m = 0..=L/2` of one ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSpectrum {
    pub length: usize,
    /// `levels[m]` are the lowest eigenvalues at `k = 2π m / L`.
    pub levels: Vec<Vec<f64>>,
    /// Energy subtracted to form excitation energies.
    pub reference_energy: f64,
}

impl RingSpectrum {
    pub fn momentum(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.length as f64
    }

    pub fn excitations(&self, m: usize) -> Vec<f64> {
        self.levels[m].iter().map(|e| e - self.reference_energy).collect()
    }
}

/// Diagonalizes every sector with `0 ≤ k ≤ π` (the rest follow by parity).
///
/// Without a longitudinal field the ring's single-particle levels sit in the
/// odd-parity sector, whose exact reference is the ground state of the twisted
/// ring; using it removes the exponentially small finite-size offset.
pub fn ring_spectrum(h: &RingHamiltonian, nev: usize, tol: f64, limit: usize) -> Result<RingSpectrum> {
    if h.length > limit {
        return Err(Error::InvalidArgument(format!(
            "ring length {} exceeds the exact-diagonalization limit {limit}",
            h.length
        )));
    }
    let orbits = Orbits::new(h.length);
    debug_assert_eq!(orbits.length, h.length);
    let levels = (0..=h.length / 2)
        .into_par_iter()
        .map(|m| MomentumSector::build(h, &orbits, m as i64).lowest(nev, tol))
        .collect::<Result<Vec<_>>>()?;
    let reference_energy = if h.g_z == 0.0 {
        h.twisted().ground_energy(tol)?
    } else {
        levels[0][0]
    };
    Ok(RingSpectrum {
        length: h.length,
        levels,
        reference_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use ndarray_linalg::{Eigh, UPLO};

    fn dense(h: &RingHamiltonian) -> Array2<C64> {
        let dim = 1usize << h.length;
        let mut m = Array2::<C64>::zeros((dim, dim));
        let mut e = vec![ZERO; dim];
        let mut out = vec![ZERO; dim];
        for c in 0..dim {
            e[c] = C64::new(1.0, 0.0);
            h.apply_full(&e, &mut out);
            m.column_mut(c).iter_mut().zip(&out).for_each(|(x, y)| *x = *y);
            e[c] = ZERO;
        }
        m
    }

    #[test]
    fn sectors_partition_the_full_spectrum() {
        let h = RingHamiltonian::new(1.25, 0.15, 8).unwrap();
        let (full, _) = dense(&h).eigh(UPLO::Upper).unwrap();
        let orbits = Orbits::new(8);
        let mut collected = Vec::new();
        for m in 0..8 {
            let s = MomentumSector::build(&h, &orbits, m);
            let d = s.dim();
            let mut mat = Array2::<C64>::zeros((d, d));
            let mut e = vec![ZERO; d];
            let mut out = vec![ZERO; d];
            for c in 0..d {
                e[c] = C64::new(1.0, 0.0);
                s.apply(&e, &mut out);
                mat.column_mut(c).iter_mut().zip(&out).for_each(|(x, y)| *x = *y);
                e[c] = ZERO;
            }
            let herm = (&mat - &mat.t().mapv(|x| x.conj())).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(herm < 1e-12, "sector {m} not hermitian: {herm}");
            collected.extend(mat.eigh(UPLO::Upper).unwrap().0.iter().copied());
        }
        collected.sort_by(f64::total_cmp);
        assert_eq!(collected.len(), full.len());
        for (a, b) in collected.iter().zip(full.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sector_lanczos_matches_dense_levels() {
        let h = RingHamiltonian::new(1.25, 0.15, 10).unwrap();
        let spec = ring_spectrum(&h, 4, 1e-12, DEFAULT_ED_LIMIT).unwrap();
        let e0 = h.ground_energy(1e-12).unwrap();
        assert!((spec.levels[0][0] - e0).abs() < 1e-9);
        assert_eq!(spec.levels.len(), 6);
    }

    #[test]
    fn free_fermion_levels_at_zero_longitudinal_field() {
        let g = 1.25;
        let h = RingHamiltonian::new(g, 0.0, 10).unwrap();
        let spec = ring_spectrum(&h, 2, 1e-12, DEFAULT_ED_LIMIT).unwrap();
        for m in 1..=5 {
            let k = spec.momentum(m);
            let exact = 2.0 * (1.0 + g * g - 2.0 * g * k.cos()).sqrt();
            assert!((spec.excitations(m)[0] - exact).abs() < 1e-8, "m = {m}");
        }
        assert!((spec.excitations(0)[1] - 0.5).abs() < 1e-8);
    }
}
