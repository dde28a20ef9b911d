//! Velocimetry and packet energies from vacuum-subtracted energy densities.

use std::ops::Range;

use crate::error::{Error, Result};

/// Energy density snapshots `(t, E_n)`.
pub type EnergySeries = [(f64, Vec<f64>)];

fn check_window(window: &Range<usize>, len: usize) -> Result<()> {
    if window.start >= window.end || window.end > len {
        return Err(Error::Window(format!("window {window:?} invalid for {len} sites")));
    }
    Ok(())
}

/// Sum of `E_n` over the window.
pub fn wavepacket_energy(energy_density: &[f64], window: Range<usize>) -> Result<f64> {
    check_window(&window, energy_density.len())?;
    Ok(energy_density[window].iter().sum())
}

/// Energy-weighted mean position within the window (positive densities only).
///
/// Fails when the density maximum sits on the window edge, i.e. the packet is
/// leaving the window.
pub fn peak_position(energy_density: &[f64], window: Range<usize>) -> Result<f64> {
    check_window(&window, energy_density.len())?;
    let seg = &energy_density[window.clone()];
    let (imax, _) = seg
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("window is non-empty");
    if seg.len() > 2 && (imax == 0 || imax == seg.len() - 1) {
        return Err(Error::Window(format!(
            "energy peak at site {} on the edge of window {window:?}",
            window.start + imax
        )));
    }
    let (mut w, mut x) = (0.0, 0.0);
    for (i, &e) in seg.iter().enumerate() {
        if e > 0.0 {
            w += e;
            x += e * (window.start + i) as f64;
        }
    }
    if w == 0.0 {
        return Err(Error::Window(format!("no excitation energy in window {window:?}")));
    }
    Ok(x / w)
}

fn positions_after(series: &EnergySeries, window: &Range<usize>, t0: f64) -> Result<Vec<(f64, f64)>> {
    let pts = series
        .iter()
        .filter(|(t, _)| *t >= t0)
        .map(|(t, e)| peak_position(e, window.clone()).map(|x| (*t, x)))
        .collect::<Result<Vec<_>>>()?;
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two snapshots after t0 = {t0}, found {}",
            pts.len()
        )));
    }
    Ok(pts)
}

/// Slope of a least-squares line through the peak position versus time, using
/// snapshots at `t >= t0`.
pub fn track_peak_velocity(series: &EnergySeries, window: Range<usize>, t0: f64) -> Result<f64> {
    let pts = positions_after(series, &window, t0)?;
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InvalidArgument("snapshots share a single time".into()));
    }
    Ok(stx / stt)
}

/// Collision time for a packet of known velocity emerging from `origin`:
/// the mean of `t - (x(t) - origin) / v` over snapshots at `t >= t_min`.
pub fn calibrate_collision_time(
    series: &EnergySeries,
    window: Range<usize>,
    origin: f64,
    velocity: f64,
    t_min: f64,
) -> Result<f64> {
    if velocity == 0.0 {
        return Err(Error::InvalidArgument("calibration velocity must be nonzero".into()));
    }
    let pts = positions_after(series, &window, t_min)?;
    Ok(pts.iter().map(|(t, x)| t - (x - origin) / velocity).sum::<f64>() / pts.len() as f64)
}

/// Average velocity from the collision at `(t0, origin)` to the last snapshot.
pub fn velocity_since_collision(series: &EnergySeries, window: Range<usize>, origin: f64, t0: f64) -> Result<f64> {
    let (t, e) = series
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty energy series".into()))?;
    if *t <= t0 {
        return Err(Error::InvalidArgument(format!("last snapshot t = {t} is not after t0 = {t0}")));
    }
    Ok((peak_position(e, window)? - origin) / (t - t0))
}
