//! Vacuum preparation and dressed wavepacket initial states.
//!
//! A packet is created by the single-flip operator `W = Σ_n a_n X_n` conjugated by
//! the dressing unitary `U`: the state is `U W_L W_R U† |vac⟩`. Away from the
//! packets `U U† = 1`, so the interacting vacuum is untouched there, while near
//! them `U` supplies the short-range dressing of the bare flip.

pub mod layers;
pub mod vacuum;
pub mod wavepacket;

pub use layers::{apply_variational_layers, PoolOperator, VariationalLayerSchedule};
pub use vacuum::{prepare_vacuum, Vacuum, VacuumOptions};
pub use wavepacket::{plane_wave_state, w_state_angles, wavepacket_reference, WavepacketSpec};

use crate::error::{Error, Result};
use crate::ising::IsingCouplings;
use crate::mps::{MatrixProductState, TruncationPolicy};

#[derive(Debug, Clone)]
pub struct DressingOptions {
    pub schedule: VariationalLayerSchedule,
    pub substeps: usize,
    pub policy: TruncationPolicy,
}

impl Default for DressingOptions {
    fn default() -> Self {
        Self {
            schedule: VariationalLayerSchedule::default_dressing(),
            substeps: 8,
            policy: TruncationPolicy {
                max_bond: 256,
                cutoff: 1e-12,
                renormalize_after_truncation: false,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: MatrixProductState,
    /// Retained fraction of each packet after windowing, in input order.
    pub norm_retained: Vec<f64>,
    pub discarded_weight: f64,
}

fn check_separation(specs: &[WavepacketSpec], length: usize) -> Result<()> {
    let mut windows = specs
        .iter()
        .map(|s| {
            s.validate()?;
            Ok((s.window(length)?, s.d))
        })
        .collect::<Result<Vec<_>>>()?;
    windows.sort_by_key(|(w, _)| w.start);
    for pair in windows.windows(2) {
        let (a, da) = &pair[0];
        let (b, db) = &pair[1];
        let gap = b.start.saturating_sub(a.end);
        if b.start < a.end || gap < (*da).max(*db) {
            return Err(Error::Window(format!(
                "packet windows {a:?} and {b:?} must be separated by at least {} sites",
                da.max(db)
            )));
        }
    }
    Ok(())
}

/// `U W_1 … W_m U† |vac⟩`, normalized.
pub fn prepare_wavepackets(
    couplings: &IsingCouplings,
    vacuum: &MatrixProductState,
    specs: &[WavepacketSpec],
    opts: &DressingOptions,
) -> Result<PreparedState> {
    couplings.validate()?;
    if vacuum.len() != couplings.length {
        return Err(Error::LengthMismatch {
            left: vacuum.len(),
            right: couplings.length,
        });
    }
    check_separation(specs, couplings.length)?;
    let mut psi = vacuum.clone();
    let mut discarded = apply_variational_layers(&mut psi, &opts.schedule.inverse(), opts.substeps, &opts.policy)?;
    let mut retained = Vec::with_capacity(specs.len());
    for spec in specs {
        let packet = wavepacket::windowed_packet(spec, couplings.length)?;
        let amps = wavepacket::cascade_loaded(&packet.amplitudes)?;
        let op = wavepacket::single_flip_operator(couplings.length, packet.first_site, &amps)?;
        discarded += psi.apply_mpo(&op, &opts.policy)?;
        retained.push(packet.norm_retained);
    }
    discarded += apply_variational_layers(&mut psi, &opts.schedule, opts.substeps, &opts.policy)?;
    psi.normalize()?;
    Ok(PreparedState {
        state: psi,
        norm_retained: retained,
        discarded_weight: discarded,
    })
}

/// Two packets with opposite momenta at mirrored positions; `left` must lie in
/// the left half of the lattice and move right.
pub fn prepare_two_wavepacket_initial_state(
    couplings: &IsingCouplings,
    vacuum: &MatrixProductState,
    left: &WavepacketSpec,
    right: &WavepacketSpec,
    opts: &DressingOptions,
) -> Result<PreparedState> {
    prepare_wavepackets(couplings, vacuum, &[*left, *right], opts)
}

/// Bare flips over the all-up reference, without dressing.
pub fn bare_reference(length: usize, specs: &[WavepacketSpec]) -> Result<MatrixProductState> {
    check_separation(specs, length)?;
    let mut psi = MatrixProductState::all_up(length);
    for spec in specs {
        let packet = wavepacket::windowed_packet(spec, length)?;
        let amps = wavepacket::cascade_loaded(&packet.amplitudes)?;
        let op = wavepacket::single_flip_operator(length, packet.first_site, &amps)?;
        psi.apply_mpo(&op, &TruncationPolicy::exact())?;
    }
    psi.normalize()?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(n0: usize) -> WavepacketSpec {
        WavepacketSpec {
            k: 0.36 * PI,
            sigma_k: 0.059 * PI,
            n0,
            d: 21,
        }
    }

    #[test]
    fn overlapping_windows_are_rejected() {
        let a = spec(20);
        let b = WavepacketSpec { k: -a.k, ..spec(45) };
        assert!(matches!(check_separation(&[a, b], 80), Err(Error::Window(_))));
        let b = WavepacketSpec { k: -a.k, ..spec(62) };
        assert!(check_separation(&[a, b], 90).is_ok());
    }

    #[test]
    fn dressing_lowers_bare_energy() {
        let c = IsingCouplings::default().with_length(90);
        let a = spec(22);
        let b = a.mirrored(90);
        let bare = bare_reference(90, &[a, b]).unwrap();
        let mut dressed = bare.clone();
        let opts = DressingOptions::default();
        apply_variational_layers(&mut dressed, &opts.schedule, opts.substeps, &opts.policy).unwrap();
        let e_bare = c.total_energy(&bare).unwrap();
        let e_dressed = c.total_energy(&dressed).unwrap();
        assert!(e_dressed < e_bare, "{e_dressed} !< {e_bare}");
    }
}
