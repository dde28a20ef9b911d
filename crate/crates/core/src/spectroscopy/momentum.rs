//! Momentum content of localized excitations.

use std::ops::Range;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mps::MatrixProductState;

fn rotate(s: usize, n: usize) -> usize {
    let mask = (1 << n) - 1;
    ((s << 1) | (s >> (n - 1))) & mask
}

/// Unitary Fourier transform on an `n`-site window of qubits.
///
/// Configurations are grouped into translation orbits `r, T r, T² r, ...` of
/// their smallest member `r` (bit strings written with the first site as the
/// most significant bit, `T` a cyclic left shift). The `j`-th orbit member is
/// sent to the plane wave `R^{-1/2} Σ_m e^{i k m} |T^m r>` with
/// `k = 2π j / R` wrapped to `(-π, π]`. Column `s` of the result is the image
/// of `|s>`.
pub fn window_fourier_transform(n: usize) -> Result<Array2<C64>> {
    if !(1..=12).contains(&n) {
        return Err(Error::InvalidArgument(format!("window of {n} sites outside 1..=12")));
    }
    let dim = 1usize << n;
    let mut out = Array2::<C64>::zeros((dim, dim));
    let mut seen = vec![false; dim];
    for r in 0..dim {
        if seen[r] {
            continue;
        }
        let mut orbit = vec![r];
        let mut t = rotate(r, n);
        while t != r {
            orbit.push(t);
            t = rotate(t, n);
        }
        let p = orbit.len();
        let norm = 1.0 / (p as f64).sqrt();
        for (j, &s) in orbit.iter().enumerate() {
            seen[s] = true;
            let k = orbit_momentum(j, p);
            for (m, &target) in orbit.iter().enumerate() {
                out[[target, s]] = C64::from_polar(norm, k * m as f64);
            }
        }
    }
    Ok(out)
}

/// `2π j / p` wrapped to `(-π, π]`.
pub fn orbit_momentum(j: usize, p: usize) -> f64 {
    let k = 2.0 * std::f64::consts::PI * j as f64 / p as f64;
    if k > std::f64::consts::PI + 1e-12 {
        k - 2.0 * std::f64::consts::PI
    } else {
        k
    }
}

/// Normalized weights `|<k|ψ>|^2 / <ψ|ψ>` of the state on single-flip plane
/// waves `|k> = |W|^{-1/2} Σ_{n∈W} e^{ikn} X_n |reference>` over the window.
///
/// On a commensurate grid (`k = 2π m / |W|`) the weights sum to the fraction of
/// the norm carried by single flips inside the window, so at most 1.
pub fn momentum_overlap(
    state: &MatrixProductState,
    reference: &MatrixProductState,
    window: Range<usize>,
    k_grid: &[f64],
) -> Result<Vec<f64>> {
    if window.start >= window.end || window.end > state.len() {
        return Err(Error::Window(format!("window {window:?} invalid for {} sites", state.len())));
    }
    let norm_sq = state.norm_sq() * reference.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let amps = state.flip_amplitudes(reference, window.clone())?;
    let w = window.len() as f64;
    Ok(k_grid
        .iter()
        .map(|&k| {
            let a: C64 = amps
                .iter()
                .enumerate()
                .map(|(i, &c)| c * C64::from_polar(1.0, -k * (window.start + i) as f64))
                .sum();
            a.norm_sqr() / w / norm_sq
        })
        .collect())
}
