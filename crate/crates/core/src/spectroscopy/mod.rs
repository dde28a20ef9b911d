//! Dispersion relations, velocimetry and particle identification.

pub mod classify;
pub mod dispersion;
pub mod ed;
pub mod momentum;
pub mod tracking;

pub use classify::{classify_excitation, ClassificationRecord, ClassifyOptions, SpeciesCandidates};
pub use dispersion::{dispersion_from_ed, group_velocity, invert_velocity, DispersionTable, EdSettings, Species};
pub use momentum::{momentum_overlap, window_fourier_transform};
pub use tracking::{calibrate_collision_time, track_peak_velocity, velocity_since_collision, wavepacket_energy};
