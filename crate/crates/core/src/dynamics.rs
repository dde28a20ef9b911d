//! Real-time evolution driver with staged truncation and snapshot capture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingCouplings, Layer, Span, TrotterGateSet};
use crate::mps::{MatrixProductState, SchmidtSpectrum, Sweep, TruncationPolicy};

/// Relative tolerance for a time to count as a whole number of steps.
const STEP_TOLERANCE: f64 = 1e-9;

/// From `t_from` onward the evolution truncates with `policy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub t_from: f64,
    pub policy: TruncationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSchedule {
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    pub stages: Vec<Stage>,
}

impl EvolutionSchedule {
    /// Snapshots every `interval` from 0 to `t_end` inclusive, with one policy throughout.
    pub fn uniform(t_end: f64, dt: f64, interval: f64, policy: TruncationPolicy) -> Self {
        let count = (t_end / interval + STEP_TOLERANCE).floor() as usize;
        Self {
            t_end,
            dt,
            snapshot_times: (0..=count).map(|i| i as f64 * interval).collect(),
            stages: vec![Stage { t_from: 0.0, policy }],
        }
    }

    fn steps_at(&self, t: f64, what: &str) -> Result<usize> {
        let x = t / self.dt;
        let r = x.round();
        if (x - r).abs() > STEP_TOLERANCE * r.max(1.0) || r < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{what} {t} is not a whole number of steps of {}",
                self.dt
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        self.steps_at(self.t_end, "t_end")?;
        for &t in &self.snapshot_times {
            if t < 0.0 || t > self.t_end + STEP_TOLERANCE {
                return Err(Error::InvalidArgument(format!("snapshot time {t} outside [0, {}]", self.t_end)));
            }
            self.steps_at(t, "snapshot time")?;
        }
        for w in self.stages.windows(2) {
            if w[1].t_from < w[0].t_from {
                return Err(Error::InvalidArgument("truncation stages must be time-ordered".into()));
            }
        }
        for s in &self.stages {
            s.policy.validate()?;
            self.steps_at(s.t_from, "stage time")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    /// Vacuum-subtracted energy density; empty when no vacuum profile was supplied.
    pub energy_density: Vec<f64>,
    pub midpoint_spectrum: SchmidtSpectrum,
    pub norm_sq: f64,
    pub max_bond_used: usize,
    pub cumulative_discarded_weight: f64,
}

/// What to measure at each snapshot and when to give up.
#[derive(Debug, Clone)]
pub struct SnapshotProbe {
    pub couplings: IsingCouplings,
    /// Normalized per-site vacuum energies (see [`IsingCouplings::vacuum_profile`]).
    pub vacuum_profile: Option<Vec<f64>>,
    pub norm_floor: f64,
}

impl SnapshotProbe {
    pub fn new(couplings: IsingCouplings, vacuum_profile: Option<Vec<f64>>) -> Self {
        Self {
            couplings,
            vacuum_profile,
            norm_floor: 0.5,
        }
    }

    pub fn record(&self, state: &MatrixProductState, t: f64, cumulative_discarded_weight: f64) -> Result<SnapshotRecord> {
        let energy_density = match &self.vacuum_profile {
            Some(v) => self.couplings.energy_density_against(state, v)?,
            None => Vec::new(),
        };
        Ok(SnapshotRecord {
            t,
            energy_density,
            midpoint_spectrum: state.schmidt_spectrum(state.len() / 2 - 1)?,
            norm_sq: state.norm_sq(),
            max_bond_used: state.max_bond(),
            cumulative_discarded_weight,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    pub state: MatrixProductState,
    pub snapshots: Vec<SnapshotRecord>,
    pub cumulative_discarded_weight: f64,
}

/// Applies one layer of gates, sweeping away from the current canonical center.
fn apply_layer(state: &mut MatrixProductState, gates: &TrotterGateSet, layer: Layer, policy: &TruncationPolicy) -> Result<f64> {
    let bonds: Vec<usize> = (layer.parity..gates.bonds()).step_by(2).collect();
    if bonds.is_empty() {
        return Ok(0.0);
    }
    let first = bonds[0];
    let last = *bonds.last().unwrap();
    let center = state.center().unwrap_or(0);
    let rightward = center.abs_diff(first) <= center.abs_diff(last + 1);
    let mut discarded = 0.0;
    if rightward {
        for &b in &bonds {
            discarded += state.apply_two_site_gate(b, gates.gate(b, layer.span), policy, Sweep::Right)?.discarded_weight;
        }
    } else {
        for &b in bonds.iter().rev() {
            discarded += state.apply_two_site_gate(b, gates.gate(b, layer.span), policy, Sweep::Left)?.discarded_weight;
        }
    }
    Ok(discarded)
}

/// Layers for `steps` consecutive steps, with adjacent half layers of the same
/// parity fused into one full layer.
fn fused_layers(gates: &TrotterGateSet, steps: usize) -> Vec<Layer> {
    let one = gates.layers();
    let mut out: Vec<Layer> = Vec::with_capacity(steps * one.len());
    for _ in 0..steps {
        for &layer in &one {
            match out.last_mut() {
                Some(prev) if prev.parity == layer.parity && prev.span == Span::Half && layer.span == Span::Half => {
                    prev.span = Span::Full;
                }
                _ => out.push(layer),
            }
        }
    }
    out
}

/// Advances `state` by `steps` Trotter steps; returns the absolute discarded weight.
pub fn advance(state: &mut MatrixProductState, gates: &TrotterGateSet, steps: usize, policy: &TruncationPolicy) -> Result<f64> {
    let mut discarded = 0.0;
    for layer in fused_layers(gates, steps) {
        discarded += apply_layer(state, gates, layer, policy)?;
    }
    Ok(discarded)
}

/// Runs the schedule. `on_snapshot` sees every record together with the state at
/// that time, e.g. to stream it to disk.
pub fn evolve<F>(
    mut state: MatrixProductState,
    gates: &TrotterGateSet,
    schedule: &EvolutionSchedule,
    probe: &SnapshotProbe,
    mut on_snapshot: F,
) -> Result<EvolutionOutcome>
where
    F: FnMut(&SnapshotRecord, &MatrixProductState) -> Result<()>,
{
    schedule.validate()?;
    if (gates.dt - schedule.dt).abs() > STEP_TOLERANCE * schedule.dt {
        return Err(Error::InvalidArgument(format!(
            "gate step {} differs from schedule step {}",
            gates.dt, schedule.dt
        )));
    }
    if gates.bonds() + 1 != state.len() {
        return Err(Error::LengthMismatch {
            left: gates.bonds() + 1,
            right: state.len(),
        });
    }
    let total = schedule.steps_at(schedule.t_end, "t_end")?;
    let mut snaps: Vec<usize> = schedule
        .snapshot_times
        .iter()
        .map(|&t| schedule.steps_at(t, "snapshot time"))
        .collect::<Result<_>>()?;
    snaps.sort_unstable();
    snaps.dedup();
    let stages: Vec<(usize, TruncationPolicy)> = schedule
        .stages
        .iter()
        .map(|s| Ok((schedule.steps_at(s.t_from, "stage time")?, s.policy)))
        .collect::<Result<_>>()?;
    let policy_at = |step: usize| {
        stages
            .iter()
            .rev()
            .find(|(from, _)| *from <= step)
            .map(|(_, p)| *p)
            .unwrap_or_default()
    };

    let mut events: Vec<usize> = snaps.iter().copied().chain(stages.iter().map(|s| s.0)).filter(|&s| s <= total).collect();
    events.push(total);
    events.sort_unstable();
    events.dedup();

    let mut records = Vec::new();
    let mut cumulative = 0.0;
    let mut step = 0usize;
    let mut policy = policy_at(0);
    for event in events {
        if event > step {
            cumulative += advance(&mut state, gates, event - step, &policy)?;
            step = event;
            let ns = state.norm_sq();
            if ns < probe.norm_floor {
                return Err(Error::NormFloor {
                    t: step as f64 * schedule.dt,
                    norm_sq: ns,
                    floor: probe.norm_floor,
                });
            }
        }
        let next = policy_at(step);
        if next != policy && step > 0 {
            cumulative += state.truncate(&next)?;
        }
        policy = next;
        if snaps.binary_search(&step).is_ok() {
            let rec = probe.record(&state, step as f64 * schedule.dt, cumulative)?;
            on_snapshot(&rec, &state)?;
            records.push(rec);
        }
    }
    Ok(EvolutionOutcome {
        state,
        snapshots: records,
        cumulative_discarded_weight: cumulative,
    })
}
