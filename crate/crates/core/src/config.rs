//! Run configuration, read from a TOML file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionSchedule, Stage};
use crate::entanglement::LabelingWindows;
use crate::error::{Error, Result};
use crate::ising::IsingCouplings;
use crate::mps::TruncationPolicy;
use crate::spectroscopy::{ClassifyOptions, EdSettings};
use crate::state_prep::{DressingOptions, VacuumOptions, VariationalLayerSchedule, WavepacketSpec};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SCATTERLAB_OUTPUT_DIR";
/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "SCATTERLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub couplings: IsingCouplings,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default)]
    pub vacuum: VacuumConfig,
    #[serde(default)]
    pub dressing: DressingConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub isolation: IsolationConfig,
    #[serde(default)]
    pub ed: EdSettings,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("scatterlab-out")
}

fn default_seed() -> u64 {
    0x5eed
}

/// The left packet; the right one is its mirror image with opposite momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub k_over_pi: f64,
    pub sigma_k_over_pi: f64,
    pub d: usize,
    /// Center of the left packet; by default `L/2 - 1 - d`, the closest
    /// placement with windows `d` sites apart.
    pub n0: Option<usize>,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self {
            k_over_pi: 0.36,
            sigma_k_over_pi: 0.059,
            d: 21,
            n0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VacuumConfig {
    pub max_bond: usize,
    pub cutoff: f64,
    pub max_sweeps: usize,
    pub variance_tol: f64,
}

impl Default for VacuumConfig {
    fn default() -> Self {
        let v = VacuumOptions::default();
        Self {
            max_bond: v.policy.max_bond,
            cutoff: v.policy.cutoff,
            max_sweeps: v.max_sweeps,
            variance_tol: v.variance_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DressingConfig {
    pub substeps: usize,
    pub max_bond: usize,
    pub cutoff: f64,
    pub schedule: VariationalLayerSchedule,
}

impl Default for DressingConfig {
    fn default() -> Self {
        let d = DressingOptions::default();
        Self {
            substeps: d.substeps,
            max_bond: d.policy.max_bond,
            cutoff: d.policy.cutoff,
            schedule: d.schedule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub t_from: f64,
    pub max_bond: usize,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub order: u8,
    pub norm_floor: f64,
    /// Truncation stages; the first must start at `t = 0`.
    pub stages: Vec<StageConfig>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 32.0,
            t_end: 120.0,
            snapshot_interval: 1.0,
            order: 2,
            norm_floor: 0.5,
            stages: vec![
                StageConfig {
                    t_from: 0.0,
                    max_bond: 600,
                    cutoff: 1e-9,
                },
                StageConfig {
                    t_from: 40.0,
                    max_bond: 350,
                    cutoff: 1e-9,
                },
            ],
        }
    }
}

/// A cut site, or `"auto"` to place it from the final energy density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutChoice {
    Site(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for CutChoice {
    fn default() -> Self {
        CutChoice::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsolationConfig {
    /// Cuts are bond indices: cut `c` keeps sites `0..=c` on the left.
    pub n_l: CutChoice,
    /// Defaults to the mirror image of `n_l`.
    pub n_r: CutChoice,
    pub margin: usize,
    pub min_fraction: f64,
    pub significance: f64,
    /// Collision time used for velocities when the elastic channel is absent.
    pub collision_time: Option<f64>,
}

impl Default for IsolationConfig {
    fn default() -> Self {
        let w = LabelingWindows::default();
        Self {
            n_l: CutChoice::default(),
            n_r: CutChoice::default(),
            margin: w.margin,
            min_fraction: w.min_fraction,
            significance: w.significance,
            collision_time: None,
        }
    }
}

impl IsolationConfig {
    pub fn windows(&self) -> LabelingWindows {
        LabelingWindows {
            margin: self.margin,
            min_fraction: self.min_fraction,
            significance: self.significance,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

fn policy(field: &str, max_bond: usize, cutoff: f64) -> Result<TruncationPolicy> {
    TruncationPolicy::new(max_bond, cutoff).map_err(|e| Error::config(field, e.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("missing field") || msg.contains("unknown field"))
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::Config { field, message: e.to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// Output directory, honouring the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }

    /// Checks every physical field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let c = &self.couplings;
        if !c.g_x.is_finite() {
            return Err(Error::config("couplings.g_x", "must be finite"));
        }
        if !c.g_z.is_finite() {
            return Err(Error::config("couplings.g_z", "must be finite"));
        }
        if c.length < 4 {
            return Err(Error::config("couplings.length", "must be at least 4"));
        }
        let p = &self.packet;
        if !(p.k_over_pi > 0.0 && p.k_over_pi < 1.0) {
            return Err(Error::config("packet.k_over_pi", "must lie in (0, 1)"));
        }
        positive("packet.sigma_k_over_pi", p.sigma_k_over_pi)?;
        if p.d == 0 || p.d % 2 == 0 {
            return Err(Error::config("packet.d", "must be odd"));
        }
        let (left, right) = self.packet_specs();
        for (name, s) in [("packet.n0", left), ("packet.n0 (mirror)", right)] {
            s.window(c.length).map_err(|e| Error::config(name, e.to_string()))?;
        }
        if left.n0 >= c.length / 2 {
            return Err(Error::config("packet.n0", "left packet must sit in the left half"));
        }
        if right.window(c.length)?.start < left.window(c.length)?.end + p.d {
            return Err(Error::config("packet.n0", "packet windows must be at least d sites apart"));
        }
        policy("vacuum", self.vacuum.max_bond, self.vacuum.cutoff)?;
        if self.vacuum.max_sweeps == 0 {
            return Err(Error::config("vacuum.max_sweeps", "must be at least 1"));
        }
        positive("vacuum.variance_tol", self.vacuum.variance_tol)?;
        if self.dressing.substeps == 0 {
            return Err(Error::config("dressing.substeps", "must be at least 1"));
        }
        policy("dressing", self.dressing.max_bond, self.dressing.cutoff)?;
        self.dressing
            .schedule
            .validate()
            .map_err(|e| Error::config("dressing.schedule", e.to_string()))?;
        let e = &self.evolution;
        positive("evolution.dt", e.dt)?;
        positive("evolution.t_end", e.t_end)?;
        positive("evolution.snapshot_interval", e.snapshot_interval)?;
        if !(1..=2).contains(&e.order) {
            return Err(Error::config("evolution.order", "Trotter order must be 1 or 2"));
        }
        if !(0.0..1.0).contains(&e.norm_floor) {
            return Err(Error::config("evolution.norm_floor", "must lie in [0, 1)"));
        }
        if e.stages.is_empty() || e.stages[0].t_from != 0.0 {
            return Err(Error::config("evolution.stages", "the first stage must start at t_from = 0"));
        }
        for (i, s) in e.stages.iter().enumerate() {
            policy(&format!("evolution.stages[{i}]"), s.max_bond, s.cutoff)?;
            if i > 0 && s.t_from <= e.stages[i - 1].t_from {
                return Err(Error::config(format!("evolution.stages[{i}].t_from"), "stages must be time-ordered"));
            }
        }
        self.schedule()
            .validate()
            .map_err(|err| Error::config("evolution", err.to_string()))?;
        let iso = &self.isolation;
        for (name, cut) in [("isolation.n_l", iso.n_l), ("isolation.n_r", iso.n_r)] {
            if let CutChoice::Site(s) = cut {
                if s + 1 >= c.length {
                    return Err(Error::config(name, format!("cut {s} outside the lattice")));
                }
            }
        }
        if let (CutChoice::Site(a), CutChoice::Site(b)) = (iso.n_l, iso.n_r) {
            if a >= b {
                return Err(Error::config("isolation.n_r", "must exceed n_l"));
            }
        }
        if !(0.0..1.0).contains(&iso.min_fraction) {
            return Err(Error::config("isolation.min_fraction", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&iso.significance) {
            return Err(Error::config("isolation.significance", "must lie in [0, 1)"));
        }
        self.ed.validate()?;
        positive("classify.max_relative_error", self.classify.max_relative_error)?;
        if !(self.classify.velocity_slack >= 0.0) {
            return Err(Error::config("classify.velocity_slack", "must be non-negative"));
        }
        Ok(())
    }

    pub fn packet_specs(&self) -> (WavepacketSpec, WavepacketSpec) {
        let l = self.couplings.length;
        let p = &self.packet;
        let n0 = p.n0.unwrap_or_else(|| (l / 2).saturating_sub(1 + p.d));
        let left = WavepacketSpec {
            k: p.k_over_pi * PI,
            sigma_k: p.sigma_k_over_pi * PI,
            n0,
            d: p.d,
        };
        (left, left.mirrored(l))
    }

    pub fn vacuum_options(&self) -> VacuumOptions {
        VacuumOptions {
            policy: TruncationPolicy {
                max_bond: self.vacuum.max_bond,
                cutoff: self.vacuum.cutoff,
                renormalize_after_truncation: true,
            },
            max_sweeps: self.vacuum.max_sweeps,
            variance_tol: self.vacuum.variance_tol,
            seed: self.seed,
        }
    }

    pub fn dressing_options(&self) -> DressingOptions {
        DressingOptions {
            schedule: self.dressing.schedule.clone(),
            substeps: self.dressing.substeps,
            policy: TruncationPolicy {
                max_bond: self.dressing.max_bond,
                cutoff: self.dressing.cutoff,
                renormalize_after_truncation: false,
            },
        }
    }

    pub fn schedule(&self) -> EvolutionSchedule {
        let e = &self.evolution;
        let n = (e.t_end / e.snapshot_interval + 1e-9).floor() as usize;
        EvolutionSchedule {
            t_end: e.t_end,
            dt: e.dt,
            snapshot_times: (0..=n).map(|i| i as f64 * e.snapshot_interval).collect(),
            stages: e
                .stages
                .iter()
                .map(|s| Stage {
                    t_from: s.t_from,
                    policy: TruncationPolicy {
                        max_bond: s.max_bond,
                        cutoff: s.cutoff,
                        renormalize_after_truncation: false,
                    },
                })
                .collect(),
        }
    }

    /// Largest bond dimension any stage allows; the χ used for antiflatness.
    pub fn nominal_chi(&self) -> usize {
        self.evolution.stages.last().map(|s| s.max_bond).unwrap_or(1)
    }

    pub fn with_couplings(couplings: IsingCouplings) -> Self {
        Self {
            couplings,
            packet: PacketConfig::default(),
            vacuum: VacuumConfig::default(),
            dressing: DressingConfig::default(),
            evolution: EvolutionConfig::default(),
            isolation: IsolationConfig::default(),
            ed: EdSettings::default(),
            classify: ClassifyOptions::default(),
            output_dir: default_output_dir(),
            seed: default_seed(),
        }
    }
}
