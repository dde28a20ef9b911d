//! Particle identification from a measured speed and packet energy.

use serde::{Deserialize, Serialize};

use super::dispersion::{invert_velocity, DispersionTable, Species};
use crate::error::{Error, Result};

/// Candidates of one species: momenta solving `v_j(k) = v` and their energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesCandidates {
    pub species: Species,
    pub momenta: Vec<f64>,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub excitation_label: String,
    pub measured_velocity: f64,
    pub candidates: Vec<SpeciesCandidates>,
    pub packet_energy: f64,
    pub chosen_species: Species,
    pub chosen_momentum: f64,
    pub chosen_energy: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Largest accepted `|E_wp - E| / E_wp`.
    pub max_relative_error: f64,
    /// Relative tolerance for speeds just beyond a group-velocity extremum.
    pub velocity_slack: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            max_relative_error: 0.15,
            velocity_slack: 0.01,
        }
    }
}

/// Chooses the species and momentum whose dispersion energy at the measured
/// speed is closest to the packet energy.
pub fn classify_excitation(
    label: &str,
    velocity: f64,
    packet_energy: f64,
    table: &DispersionTable,
    opts: &ClassifyOptions,
) -> Result<ClassificationRecord> {
    if !(packet_energy > 0.0) {
        return Err(Error::Unclassifiable(format!("{label}: packet energy {packet_energy} is not positive")));
    }
    let mut candidates = Vec::new();
    for species in [Species::Light, Species::Heavy] {
        let momenta = invert_velocity(table, species, velocity, opts.velocity_slack)?;
        let energies = match table.band(species) {
            Ok(b) => momenta.iter().map(|&k| b.energy(k)).collect(),
            Err(_) => Vec::new(),
        };
        candidates.push(SpeciesCandidates {
            species,
            momenta,
            energies,
        });
    }
    // ties resolve to the lighter species, then the smaller momentum
    let best = candidates
        .iter()
        .flat_map(|c| c.momenta.iter().zip(&c.energies).map(move |(&k, &e)| (c.species, k, e)))
        .min_by(|a, b| {
            (a.2 - packet_energy)
                .abs()
                .total_cmp(&(b.2 - packet_energy).abs())
                .then((a.0 as u8).cmp(&(b.0 as u8)))
                .then(a.1.total_cmp(&b.1))
        })
        .ok_or_else(|| Error::Unclassifiable(format!("{label}: no momentum has group velocity {velocity}")))?;
    let relative_error = (packet_energy - best.2).abs() / packet_energy;
    if relative_error > opts.max_relative_error {
        return Err(Error::Unclassifiable(format!(
            "{label}: closest match E = {:.4} misses E_wp = {packet_energy:.4} by {:.1}%",
            best.2,
            100.0 * relative_error
        )));
    }
    Ok(ClassificationRecord {
        excitation_label: label.to_string(),
        measured_velocity: velocity,
        candidates,
        packet_energy,
        chosen_species: best.0,
        chosen_momentum: best.1,
        chosen_energy: best.2,
        relative_error,
    })
}
