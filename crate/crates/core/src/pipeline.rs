//! End-to-end stages driven by a [`RunConfig`].

use serde::{Deserialize, Serialize};

use crate::config::{CutChoice, RunConfig};
use crate::dynamics::{evolve, EvolutionOutcome, SnapshotProbe, SnapshotRecord};
use crate::entanglement::{
    antiflatness, auto_cut, entanglement_entropy, isolate_channels, mirrored_cut, ChannelLabel, IsolationOutcome,
};
use crate::error::{Error, Result};
use crate::ising::build_trotter_gates;
use crate::mps::MatrixProductState;
use crate::spectroscopy::{
    classify_excitation, dispersion_from_ed, group_velocity, tracking::peak_position, wavepacket_energy,
    ClassificationRecord, DispersionTable, Species,
};
use crate::state_prep::{prepare_two_wavepacket_initial_state, prepare_vacuum, PreparedState, Vacuum};

pub fn run_vacuum(cfg: &RunConfig) -> Result<Vacuum> {
    let vac = prepare_vacuum(&cfg.couplings, &cfg.vacuum_options())?;
    log::info!(
        "vacuum: E = {:.10}, variance = {:.2e}, {} sweeps, χ = {}",
        vac.energy,
        vac.variance,
        vac.sweeps,
        vac.state.max_bond()
    );
    Ok(vac)
}

pub fn prepare_initial_state(cfg: &RunConfig, vacuum: &MatrixProductState) -> Result<PreparedState> {
    let (left, right) = cfg.packet_specs();
    prepare_two_wavepacket_initial_state(&cfg.couplings, vacuum, &left, &right, &cfg.dressing_options())
}

/// Scalar diagnostics of one snapshot, one JSON line each in the snapshot stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub t: f64,
    pub norm_sq: f64,
    pub max_bond: usize,
    pub cumulative_discarded_weight: f64,
    pub excitation_energy: f64,
    /// `max_n |E_n - E_{L-1-n}|`.
    pub parity_defect: f64,
    pub midpoint_entropy: f64,
    pub midpoint_antiflatness: f64,
    /// Midpoint Schmidt values above 1e-2.
    pub midpoint_significant: Vec<f64>,
}

pub fn summarize(rec: &SnapshotRecord, chi: usize) -> Result<SnapshotSummary> {
    let e = &rec.energy_density;
    let l = e.len();
    let parity_defect = (0..l).map(|n| (e[n] - e[l - 1 - n]).abs()).fold(0.0, f64::max);
    let spec = &rec.midpoint_spectrum;
    Ok(SnapshotSummary {
        t: rec.t,
        norm_sq: rec.norm_sq,
        max_bond: rec.max_bond_used,
        cumulative_discarded_weight: rec.cumulative_discarded_weight,
        excitation_energy: e.iter().sum(),
        parity_defect,
        midpoint_entropy: entanglement_entropy(spec),
        midpoint_antiflatness: antiflatness(spec, chi.max(spec.values.len()))?,
        midpoint_significant: spec.values.iter().copied().filter(|&v| v > 1e-2).collect(),
    })
}

pub struct ScatterRun {
    pub vacuum_profile: Vec<f64>,
    pub prepared: PreparedState,
    pub initial_excitation_energy: f64,
    pub outcome: EvolutionOutcome,
}

/// Prepares the two-packet state on top of `vacuum` and evolves it.
pub fn run_scatter<F>(cfg: &RunConfig, vacuum: &MatrixProductState, on_snapshot: F) -> Result<ScatterRun>
where
    F: FnMut(&SnapshotRecord, &MatrixProductState) -> Result<()>,
{
    cfg.validate()?;
    let c = &cfg.couplings;
    let profile = c.vacuum_profile(vacuum)?;
    let prepared = prepare_initial_state(cfg, vacuum)?;
    let initial: f64 = c.energy_density_against(&prepared.state, &profile)?.iter().sum();
    log::info!("initial state: χ = {}, excitation energy {initial:.6}", prepared.state.max_bond());
    let gates = build_trotter_gates(c, cfg.evolution.dt, cfg.evolution.order, false)?;
    let mut probe = SnapshotProbe::new(*c, Some(profile.clone()));
    probe.norm_floor = cfg.evolution.norm_floor;
    let outcome = evolve(prepared.state.clone(), &gates, &cfg.schedule(), &probe, on_snapshot)?;
    Ok(ScatterRun {
        vacuum_profile: profile,
        prepared,
        initial_excitation_energy: initial,
        outcome,
    })
}

/// Cut sites from the configuration, placing `"auto"` cuts from the energy density.
pub fn resolve_cuts(cfg: &RunConfig, energy_density: &[f64]) -> Result<(usize, usize)> {
    let l = cfg.couplings.length;
    let n_l = match cfg.isolation.n_l {
        CutChoice::Site(s) => s,
        CutChoice::Auto(_) => auto_cut(energy_density)?,
    };
    let n_r = match cfg.isolation.n_r {
        CutChoice::Site(s) => s,
        CutChoice::Auto(_) => mirrored_cut(l, n_l),
    };
    if n_l >= n_r || n_r + 1 >= l {
        return Err(Error::Isolation(format!("cuts ({n_l}, {n_r}) are not ordered inside the lattice")));
    }
    Ok((n_l, n_r))
}

/// Renormalizes the final state and runs the two-cut isolation.
pub fn isolate(cfg: &RunConfig, final_state: &MatrixProductState, vacuum_profile: &[f64]) -> Result<IsolationOutcome> {
    let mut psi = final_state.clone();
    psi.normalize()?;
    let e = cfg.couplings.energy_density_against(&psi, vacuum_profile)?;
    let cuts = resolve_cuts(cfg, &e)?;
    log::info!("isolating channels with cuts at {cuts:?}");
    isolate_channels(&psi, &cfg.couplings, vacuum_profile, cuts, &cfg.isolation.windows())
}

/// One outgoing excitation of an exclusive state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub channel: usize,
    pub label: String,
    pub window: (usize, usize),
    pub position: f64,
    pub energy: f64,
}

/// Excitations of every labeled channel, one per lattice half carrying at least
/// `min_energy` of the normalized exclusive state's energy. Halves whose
/// packet cannot be located are reported in the second list instead.
pub fn channel_excitations(
    cfg: &RunConfig,
    outcome: &IsolationOutcome,
    vacuum_profile: &[f64],
    min_energy: f64,
) -> Result<(Vec<Excitation>, Vec<String>)> {
    let l = cfg.couplings.length;
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (i, (rec, state)) in outcome.report.channels.iter().zip(&outcome.states).enumerate() {
        if rec.label == ChannelLabel::HigherOrder {
            continue;
        }
        let ns = state.norm_sq();
        let e: Vec<f64> = cfg
            .couplings
            .energy_density_against(state, vacuum_profile)?
            .iter()
            .map(|x| x / ns)
            .collect();
        for (side, window) in [("left", 0..l / 2), ("right", l / 2..l)] {
            let energy = wavepacket_energy(&e, window.clone())?;
            if energy < min_energy {
                continue;
            }
            let label = format!("{}:{side}", rec.label.as_str());
            match peak_position(&e, window.clone()) {
                Ok(position) => out.push(Excitation {
                    channel: i,
                    label,
                    window: (window.start, window.end),
                    position,
                    energy,
                }),
                Err(err) => skipped.push(format!("{label}: {err}")),
            }
        }
    }
    Ok((out, skipped))
}

/// Classifies every excitation of the labeled channels and attaches the records
/// to the report. Velocities are measured from the collision point at the
/// lattice center, with the collision time calibrated on the elastic channel,
/// whose outgoing speed is the group velocity at the incoming momentum.
pub fn classify_channels(
    cfg: &RunConfig,
    outcome: &mut IsolationOutcome,
    vacuum_profile: &[f64],
    table: &DispersionTable,
    t_final: f64,
) -> Result<Vec<ClassificationRecord>> {
    let l = cfg.couplings.length;
    let center = (l as f64 - 1.0) / 2.0;
    let m1 = table.mass(Species::Light)?;
    let (excitations, skipped) = channel_excitations(cfg, outcome, vacuum_profile, 0.5 * m1)?;
    for w in skipped {
        log::warn!("{w}");
        outcome.report.warnings.push(w);
    }
    let v_in = group_velocity(table, Species::Light, cfg.packet.k_over_pi * std::f64::consts::PI)?;
    let elastic: Vec<f64> = excitations
        .iter()
        .filter(|x| x.label.starts_with("11:"))
        .map(|x| t_final - (x.position - center).abs() / v_in)
        .collect();
    let t0 = if elastic.is_empty() {
        cfg.isolation.collision_time.ok_or_else(|| {
            Error::Isolation("no elastic channel to calibrate the collision time; set isolation.collision_time".into())
        })?
    } else {
        elastic.iter().sum::<f64>() / elastic.len() as f64
    };
    if t_final <= t0 {
        return Err(Error::Isolation(format!("collision time {t0:.2} is not before t = {t_final}")));
    }
    log::info!("collision time t0 = {t0:.3}");
    let mut records = Vec::new();
    for x in &excitations {
        let v = (x.position - center) / (t_final - t0);
        match classify_excitation(&x.label, v, x.energy, table, &cfg.classify) {
            Ok(r) => {
                outcome.report.channels[x.channel].classification.push(r.clone());
                records.push(r);
            }
            Err(e) => {
                log::warn!("{e}");
                outcome.report.warnings.push(e.to_string());
            }
        }
    }
    Ok(records)
}

/// Midpoint entanglement of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementRow {
    pub state: String,
    pub significant: Vec<f64>,
    pub antiflatness: f64,
    pub entropy: f64,
}

pub fn midpoint_entanglement(name: &str, state: &MatrixProductState, chi: usize) -> Result<EntanglementRow> {
    let spec = state.schmidt_spectrum(state.len() / 2 - 1)?;
    Ok(EntanglementRow {
        state: name.to_string(),
        significant: spec.values.iter().copied().filter(|&v| v > 1e-2).collect(),
        antiflatness: antiflatness(&spec, chi.max(spec.values.len()))?,
        entropy: entanglement_entropy(&spec),
    })
}

/// Dispersion table for the configured couplings.
pub fn run_dispersion(cfg: &RunConfig) -> Result<DispersionTable> {
    dispersion_from_ed(&cfg.couplings, &cfg.ed)
}
