//! Single-flip wavepackets and plane waves over the all-up reference, and the
//! rotation-cascade angles that load real amplitudes onto a window.

use std::f64::consts::PI;

use ndarray::{Array3, Array4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ONE, ZERO};
use crate::mps::MatrixProductState;

/// Tolerance on `Σ c_i² = 1` for the angle solver.
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    /// Central momentum in radians per site; its sign sets the direction.
    pub k: f64,
    /// Width in momentum space.
    pub sigma_k: f64,
    /// Central site.
    pub n0: usize,
    /// Number of sites kept in position space (odd).
    pub d: usize,
}

impl WavepacketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.abs() > 0.0 && self.k.abs() < PI) {
            return Err(Error::InvalidArgument(format!("packet momentum must satisfy 0 < |k| < π, got {}", self.k)));
        }
        if !(self.sigma_k > 0.0 && self.sigma_k.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_k must be positive, got {}", self.sigma_k)));
        }
        if self.d % 2 == 0 {
            return Err(Error::InvalidArgument(format!("window width d must be odd, got {}", self.d)));
        }
        Ok(())
    }

    /// First site of the window.
    pub fn first_site(&self) -> Result<usize> {
        let half = (self.d - 1) / 2;
        self.n0
            .checked_sub(half)
            .ok_or_else(|| Error::Window(format!("packet window around site {} starts before site 0", self.n0)))
    }

    pub fn window(&self, length: usize) -> Result<std::ops::Range<usize>> {
        let first = self.first_site()?;
        if first + self.d > length {
            return Err(Error::Window(format!(
                "packet window [{first}, {}) exceeds the {length}-site lattice",
                first + self.d
            )));
        }
        Ok(first..first + self.d)
    }

    /// Reflection through the lattice center: opposite momentum, mirrored position.
    pub fn mirrored(&self, length: usize) -> Self {
        Self {
            k: -self.k,
            n0: length - 1 - self.n0,
            ..*self
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Single-flip amplitudes of the packet before truncation, for every site of an
/// `length`-site ring: `Σ_m e^{-i k_m n0} e^{-(k - k_m)²/(2σ²)} e^{i k_m n} / √L`
/// over the grid momenta `k_m = 2πm/L`, with momentum differences wrapped.
pub fn packet_amplitudes(spec: &WavepacketSpec, length: usize) -> Vec<C64> {
    let l = length as f64;
    let weights: Vec<(f64, f64)> = (0..length)
        .map(|m| {
            let km = 2.0 * PI * m as f64 / l;
            let dk = wrap_angle(spec.k - km);
            (km, (-dk * dk / (2.0 * spec.sigma_k * spec.sigma_k)).exp())
        })
        .collect();
    (0..length)
        .map(|n| {
            let rel = n as f64 - spec.n0 as f64;
            weights
                .iter()
                .map(|&(km, g)| C64::from_polar(g, km * rel))
                .sum::<C64>()
                / l.sqrt()
        })
        .collect()
}

/// Normalized amplitudes on the `d`-site window and the fraction of the
/// untruncated norm they carry.
#[derive(Debug, Clone)]
pub struct WindowedPacket {
    pub first_site: usize,
    pub amplitudes: Vec<C64>,
    pub norm_retained: f64,
}

pub fn windowed_packet(spec: &WavepacketSpec, length: usize) -> Result<WindowedPacket> {
    spec.validate()?;
    let window = spec.window(length)?;
    // amplitudes depend only on n - n0, so evaluate on a ring large enough that
    // the packet does not wrap onto itself
    let ring = length.max(8 * spec.d).max((8.0 / spec.sigma_k).ceil() as usize);
    let centered = WavepacketSpec { n0: ring / 2, ..*spec };
    let full = packet_amplitudes(&centered, ring);
    let total: f64 = full.iter().map(|a| a.norm_sqr()).sum();
    let start = centered.first_site()?;
    let kept: Vec<C64> = full[start..start + spec.d].to_vec();
    let kept_sq: f64 = kept.iter().map(|a| a.norm_sqr()).sum();
    let norm = kept_sq.sqrt();
    Ok(WindowedPacket {
        first_site: window.start,
        amplitudes: kept.iter().map(|a| a / norm).collect(),
        norm_retained: kept_sq / total,
    })
}

/// Index of the largest `|c_i|` (first one on ties).
pub fn peak_index(c: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    best
}

/// `2 asin(sqrt(kept / (kept + rest)))`, well conditioned when `rest` is small.
fn split_angle(kept: f64, rest: f64) -> f64 {
    2.0 * kept.max(0.0).sqrt().atan2(rest.max(0.0).sqrt())
}

/// Rotation angles of the cascade that loads `|c_i|` onto a window, starting
/// from a single excitation at `peak`. Entry `peak - 1` is unused and zero.
pub fn w_state_angles(c: &[f64], peak: usize) -> Result<Vec<f64>> {
    let d = c.len();
    if d == 0 || peak >= d {
        return Err(Error::InvalidArgument(format!("peak index {peak} outside {d} coefficients")));
    }
    let total: f64 = c.iter().map(|x| x * x).sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!("coefficients must be normalized, Σc² = {total}")));
    }
    if c[peak] == 0.0 {
        return Err(Error::InvalidArgument(format!("coefficient at peak index {peak} is zero")));
    }
    // suffix sums T_p = Σ_{i≥p} c_i² and prefix sums U_p = Σ_{i≤p} c_i²
    let mut suffix = vec![0.0; d + 1];
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1] + c[i] * c[i];
    }
    let mut prefix = vec![0.0; d];
    let mut acc = 0.0;
    for i in 0..d {
        acc += c[i] * c[i];
        prefix[i] = acc;
    }
    let mut theta = vec![0.0; d];
    theta[peak] = split_angle(suffix[peak], prefix.get(peak.wrapping_sub(1)).copied().unwrap_or(0.0));
    for q in peak + 1..d {
        theta[q] = split_angle(suffix[q], c[q - 1] * c[q - 1]);
    }
    for q in 0..peak.saturating_sub(1) {
        theta[q] = split_angle(prefix[q], c[q + 1] * c[q + 1]);
    }
    Ok(theta)
}

/// Amplitudes produced by the cascade with angles `theta` around `peak`.
pub fn cascade_amplitudes(theta: &[f64], peak: usize) -> Vec<f64> {
    let d = theta.len();
    let half_sin = |i: usize| (theta[i] / 2.0).sin();
    let half_cos = |i: usize| (theta[i] / 2.0).cos();
    let mut c = vec![0.0; d];
    let mut prod = 1.0;
    for p in peak..d {
        prod *= half_sin(p);
        let stop = if p + 1 < d { half_cos(p + 1) } else { 1.0 };
        c[p] = prod * stop;
    }
    let left = half_cos(peak);
    let mut prod = 1.0;
    for p in (0..peak).rev() {
        if p + 2 <= peak {
            prod *= half_sin(p);
        }
        let stop = if p >= 1 { half_cos(p - 1) } else { 1.0 };
        c[p] = left * prod * stop;
    }
    c
}

/// Bond-dimension-2 MPS `Σ_n a_n X_n |↑…↑⟩` with `a` supported on
/// `first .. first + a.len()`.
pub fn single_flip_state(length: usize, first: usize, amplitudes: &[C64]) -> Result<MatrixProductState> {
    let d = amplitudes.len();
    if d == 0 || first + d > length {
        return Err(Error::Window(format!("flip window [{first}, {}) outside the lattice", first + d)));
    }
    let mut tensors = Vec::with_capacity(length);
    for n in 0..length {
        if n < first || n >= first + d {
            tensors.push(Array3::from_shape_vec((1, 2, 1), vec![ONE, ZERO])?);
            continue;
        }
        let a = amplitudes[n - first];
        let dl = if n == first { 1 } else { 2 };
        let dr = if n + 1 == first + d { 1 } else { 2 };
        let mut t = Array3::<C64>::zeros((dl, 2, dr));
        // bond state 0: no flip yet; 1: flip placed
        let done_r = dr - 1;
        if dl == 2 {
            t[[1, 0, done_r]] = ONE;
        }
        if dr == 2 {
            t[[0, 0, 0]] = ONE;
        }
        t[[0, 1, done_r]] = a;
        tensors.push(t);
    }
    MatrixProductState::from_tensors(tensors, None, 0.0)
}

/// MPO for `Σ_n a_n X_n` with `a` supported on `first .. first + a.len()`.
pub fn single_flip_operator(length: usize, first: usize, amplitudes: &[C64]) -> Result<Vec<Array4<C64>>> {
    let d = amplitudes.len();
    if d == 0 || first + d > length {
        return Err(Error::Window(format!("flip window [{first}, {}) outside the lattice", first + d)));
    }
    let mut out = Vec::with_capacity(length);
    for n in 0..length {
        let mut w;
        if n < first || n >= first + d {
            w = Array4::<C64>::zeros((1, 1, 2, 2));
            w[[0, 0, 0, 0]] = ONE;
            w[[0, 0, 1, 1]] = ONE;
        } else {
            let dl = if n == first { 1 } else { 2 };
            let dr = if n + 1 == first + d { 1 } else { 2 };
            let done_r = dr - 1;
            w = Array4::<C64>::zeros((dl, dr, 2, 2));
            let a = amplitudes[n - first];
            w[[0, done_r, 0, 1]] = a;
            w[[0, done_r, 1, 0]] = a;
            if dr == 2 {
                w[[0, 0, 0, 0]] = ONE;
                w[[0, 0, 1, 1]] = ONE;
            }
            if dl == 2 {
                w[[1, done_r, 0, 0]] = ONE;
                w[[1, done_r, 1, 1]] = ONE;
            }
        }
        out.push(w);
    }
    Ok(out)
}

/// Plane wave `Σ_n e^{ikn} X_n |↑…↑⟩ / √L` over the whole open chain.
pub fn plane_wave_state(k: f64, length: usize) -> Result<MatrixProductState> {
    let norm = (length as f64).sqrt();
    let amps: Vec<C64> = (0..length).map(|n| C64::from_polar(1.0 / norm, k * n as f64)).collect();
    single_flip_state(length, 0, &amps)
}

/// Windowed single-flip packet over the all-up reference, with amplitudes
/// loaded through the rotation cascade and phases applied per site.
pub fn wavepacket_reference(spec: &WavepacketSpec, length: usize) -> Result<(MatrixProductState, f64)> {
    let packet = windowed_packet(spec, length)?;
    let amps = cascade_loaded(&packet.amplitudes)?;
    Ok((single_flip_state(length, packet.first_site, &amps)?, packet.norm_retained))
}

/// Splits complex amplitudes into magnitudes and phases, reconstructs the
/// magnitudes through [`w_state_angles`] and reattaches the phases.
pub fn cascade_loaded(amplitudes: &[C64]) -> Result<Vec<C64>> {
    let mags: Vec<f64> = amplitudes.iter().map(|a| a.norm()).collect();
    let peak = peak_index(&mags);
    let theta = w_state_angles(&mags, peak)?;
    let loaded = cascade_amplitudes(&theta, peak);
    Ok(amplitudes
        .iter()
        .zip(loaded)
        .map(|(a, m)| C64::from_polar(m, a.arg()))
        .collect())
}
