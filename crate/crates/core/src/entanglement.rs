//! Entanglement diagnostics and isolation of exclusive scattering channels by
//! successive Schmidt decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingCouplings;
use crate::mps::{MatrixProductState, SchmidtSpectrum};
use crate::spectroscopy::ClassificationRecord;

/// `-Σ λ ln λ` over the spectrum as given, with `0 ln 0 = 0`.
pub fn entanglement_entropy(spectrum: &SchmidtSpectrum) -> f64 {
    spectrum
        .values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum()
}

/// Variance of the spectrum padded with zeros to `chi` entries:
/// `(1/χ) Σ λ² - ((1/χ) Σ λ)²`.
pub fn antiflatness(spectrum: &SchmidtSpectrum, chi: usize) -> Result<f64> {
    let nonzero = spectrum.values.iter().filter(|&&l| l != 0.0).count();
    if chi == 0 || chi < nonzero {
        return Err(Error::InvalidArgument(format!(
            "antiflatness needs chi >= {nonzero} nonzero values, got {chi}"
        )));
    }
    let n = chi as f64;
    let s1: f64 = spectrum.values.iter().sum();
    let s2: f64 = spectrum.values.iter().map(|l| l * l).sum();
    Ok(s2 / n - (s1 / n) * (s1 / n))
}

/// Spectrum of the vacuum at one cut, used as the entanglement baseline.
pub fn vacuum_spectrum_baseline(vacuum: &MatrixProductState, cut: usize) -> Result<SchmidtSpectrum> {
    vacuum.schmidt_spectrum(cut)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelLabel {
    #[serde(rename = "11")]
    Elastic,
    /// Fast light particle on the left, slow heavy particle on the right.
    #[serde(rename = "12")]
    LightLeft,
    /// Slow heavy particle on the left, fast light particle on the right.
    #[serde(rename = "21")]
    LightRight,
    #[serde(rename = "higher-order")]
    HigherOrder,
}

impl ChannelLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Elastic => "11",
            Self::LightLeft => "12",
            Self::LightRight => "21",
            Self::HigherOrder => "higher-order",
        }
    }
}

/// Settings for labeling Schmidt components by where their energy sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingWindows {
    /// Sites next to a cut excluded from the outer regions (product-state artifacts).
    pub margin: usize,
    /// Minimum fraction of a component's excitation energy in an outer region
    /// for it to count as carrying a fast particle there.
    pub min_fraction: f64,
    /// Components with `λ` above this fraction of the analyzed norm are significant.
    pub significance: f64,
}

impl Default for LabelingWindows {
    fn default() -> Self {
        Self {
            margin: 3,
            min_fraction: 0.2,
            significance: 1e-2,
        }
    }
}

/// Where a component's excitation energy sits relative to the two cuts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySupport {
    pub total: f64,
    pub outer_left: f64,
    pub outer_right: f64,
}

impl EnergySupport {
    fn fast_left(&self, w: &LabelingWindows) -> bool {
        self.total > 0.0 && self.outer_left > w.min_fraction * self.total
    }

    fn fast_right(&self, w: &LabelingWindows) -> bool {
        self.total > 0.0 && self.outer_right > w.min_fraction * self.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub label: ChannelLabel,
    pub probability: f64,
    /// Identifier of the exclusive state, `f<first-cut indices>_<second-cut index>`;
    /// the indices are comma-separated once any exceeds 9.
    pub component: String,
    /// Schmidt indices kept at the first cut.
    pub first_cut_indices: Vec<usize>,
    /// Schmidt index selected at the second cut.
    pub second_cut_index: usize,
    /// Spectrum of the intermediate state at the second cut.
    pub spectrum_used: SchmidtSpectrum,
    pub cut_sites: (usize, usize),
    pub support: EnergySupport,
    /// Classification of this channel's excitations, filled in by the spectroscopy stage.
    #[serde(default)]
    pub classification: Vec<ClassificationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub channels: Vec<ChannelRecord>,
    pub residual_probability: f64,
    pub cut_positions: (usize, usize),
    pub norm_sq: f64,
    pub first_cut_spectrum: SchmidtSpectrum,
    pub first_cut_support: Vec<EnergySupport>,
    pub warnings: Vec<String>,
}

impl ChannelReport {
    pub fn probability(&self, label: ChannelLabel) -> f64 {
        self.channels.iter().filter(|c| c.label == label).map(|c| c.probability).sum()
    }

    /// Total inelastic probability `P(12) + P(21)`.
    pub fn inelastic_probability(&self) -> f64 {
        self.probability(ChannelLabel::LightLeft) + self.probability(ChannelLabel::LightRight)
    }
}

/// Report plus the unnormalized exclusive states, parallel to `report.channels`.
#[derive(Debug, Clone)]
pub struct IsolationOutcome {
    pub report: ChannelReport,
    pub states: Vec<MatrixProductState>,
}

/// Mirror image of a cut: the cut between `c` and `c + 1` maps to the one between
/// `L - 2 - c` and `L - 1 - c`.
pub fn mirrored_cut(length: usize, cut: usize) -> usize {
    length - 2 - cut
}

/// Picks the left cut in the quietest stretch between the outermost energy peak
/// of the left half and the next group of excitations toward the center.
pub fn auto_cut(energy_density: &[f64]) -> Result<usize> {
    let l = energy_density.len();
    let half = l / 2;
    if half < 4 {
        return Err(Error::Isolation("lattice too short for automatic cuts".into()));
    }
    let e: Vec<f64> = (0..half)
        .map(|n| {
            let lo = n.saturating_sub(1);
            let hi = (n + 1).min(half - 1);
            energy_density[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak = e.iter().cloned().fold(f64::MIN, f64::max);
    if peak <= 0.0 {
        return Err(Error::Isolation("no excitation energy in the left half".into()));
    }
    let level = 0.3 * peak;
    let start = e
        .iter()
        .position(|&x| x >= level)
        .ok_or_else(|| Error::Isolation("no outer peak found".into()))?;
    let mut p1 = start;
    while p1 + 1 < half && e[p1 + 1] >= e[p1] {
        p1 += 1;
    }
    if p1 + 1 >= half {
        return Err(Error::Isolation("energy in the left half peaks at the midpoint; no gap to cut".into()));
    }
    let mut q = p1;
    while q + 1 < half && e[q + 1] <= e[q] {
        q += 1;
    }
    let p2 = (q..half).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap_or(half - 1);
    let end = if e[p2] >= 0.05 * peak { p2 } else { half - 1 };
    let (lo, hi) = (p1, end.max(p1 + 1));
    let floor = (lo..=hi).map(|n| e[n]).fold(f64::MAX, f64::min);
    let tol = floor.abs() + 0.01 * peak;
    let m = (lo..=hi).min_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
    let mut a = m;
    while a > lo && e[a - 1] <= floor + tol {
        a -= 1;
    }
    let mut b = m;
    while b < hi && e[b + 1] <= floor + tol {
        b += 1;
    }
    Ok((a + b) / 2)
}

struct Analyzer<'a> {
    couplings: &'a IsingCouplings,
    vacuum_profile: &'a [f64],
    cuts: (usize, usize),
    windows: LabelingWindows,
}

impl Analyzer<'_> {
    fn support(&self, state: &MatrixProductState) -> Result<EnergySupport> {
        let ns = state.norm_sq();
        if ns == 0.0 {
            return Ok(EnergySupport {
                total: 0.0,
                outer_left: 0.0,
                outer_right: 0.0,
            });
        }
        let e = self.couplings.energy_density_against(state, self.vacuum_profile)?;
        let m = self.windows.margin;
        let (nl, nr) = self.cuts;
        let left_end = (nl + 1).saturating_sub(m);
        let right_start = (nr + 1 + m).min(e.len());
        Ok(EnergySupport {
            total: e.iter().sum::<f64>() / ns,
            outer_left: e[..left_end].iter().sum::<f64>() / ns,
            outer_right: e[right_start..].iter().sum::<f64>() / ns,
        })
    }

    fn significant(&self, spectrum: &SchmidtSpectrum, norm_sq: f64) -> Vec<usize> {
        spectrum
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > self.windows.significance * norm_sq)
            .map(|(i, _)| i)
            .collect()
    }
}

fn component_id(first: &[usize], second: usize) -> String {
    let sep = if first.iter().any(|&i| i > 9) { "," } else { "" };
    let f: Vec<String> = first.iter().map(|i| i.to_string()).collect();
    format!("f{}_{second}", f.join(sep))
}

/// Two-cut isolation of the elastic and inelastic channels.
///
/// At the left cut, significant components are split by whether they carry a
/// fast particle to the left of the cut. Those that do are recombined and cut
/// again at the right cut: the heaviest component with a fast particle on the
/// right is the elastic channel, the heaviest one without is "12", and the rest
/// are higher-order. Components without a fast left particle are cut at the
/// right cut as well: the heaviest component with a fast right particle is "21",
/// the rest higher-order.
pub fn isolate_channels(
    final_state: &MatrixProductState,
    couplings: &IsingCouplings,
    vacuum_profile: &[f64],
    cuts: (usize, usize),
    windows: &LabelingWindows,
) -> Result<IsolationOutcome> {
    let l = final_state.len();
    let (nl, nr) = cuts;
    if nl >= nr || nr + 1 >= l {
        return Err(Error::InvalidArgument(format!(
            "cuts must satisfy n_l < n_r < L - 1, got ({nl}, {nr}) for L = {l}"
        )));
    }
    let an = Analyzer {
        couplings,
        vacuum_profile,
        cuts,
        windows: *windows,
    };
    let norm_sq = final_state.norm_sq();
    let mut warnings = Vec::new();

    let first = final_state.schmidt_spectrum(nl)?;
    let sig = an.significant(&first, norm_sq);
    let mut supports = Vec::with_capacity(sig.len());
    let (mut group_a, mut group_b) = (Vec::new(), Vec::new());
    for &i in &sig {
        let comp = final_state.project_schmidt_component(nl, &[i])?.state;
        let s = an.support(&comp)?;
        if s.fast_left(windows) {
            group_a.push(i);
        } else {
            group_b.push(i);
        }
        supports.push(s);
    }

    let mut channels = Vec::new();
    let mut states = Vec::new();
    let mut second_cut = |keep: &[usize], fast_right_label: ChannelLabel, other_label: Option<ChannelLabel>, warnings: &mut Vec<String>| -> Result<()> {
        if keep.is_empty() {
            return Ok(());
        }
        let part = final_state.project_schmidt_component(nl, keep)?.state;
        let part_norm = part.norm_sq();
        let spec = part.schmidt_spectrum(nr)?;
        let sig2 = an.significant(&spec, norm_sq);
        let mut fast: Option<usize> = None;
        let mut slow: Option<usize> = None;
        let mut comps = Vec::new();
        for &j in &sig2 {
            let comp = part.project_schmidt_component(nr, &[j])?.state;
            let s = an.support(&comp)?;
            if s.fast_right(windows) {
                fast.get_or_insert(j);
            } else {
                slow.get_or_insert(j);
            }
            comps.push((j, comp, s));
        }
        if fast.is_none() {
            warnings.push(format!(
                "no component with a fast right particle after keeping {keep:?} at the left cut"
            ));
        }
        for (j, comp, s) in comps {
            let label = if Some(j) == fast {
                fast_right_label
            } else if other_label.is_some() && Some(j) == slow {
                other_label.unwrap()
            } else {
                ChannelLabel::HigherOrder
            };
            channels.push(ChannelRecord {
                label,
                probability: spec.values[j],
                component: component_id(keep, j),
                first_cut_indices: keep.to_vec(),
                second_cut_index: j,
                spectrum_used: spec.clone(),
                cut_sites: cuts,
                support: s,
                classification: Vec::new(),
            });
            states.push(comp);
        }
        let _ = part_norm;
        Ok(())
    };
    second_cut(&group_a, ChannelLabel::Elastic, Some(ChannelLabel::LightLeft), &mut warnings)?;
    second_cut(&group_b, ChannelLabel::LightRight, None, &mut warnings)?;

    if group_a.is_empty() {
        warnings.push("no significant component carries a fast left particle".into());
    }
    let total: f64 = channels.iter().map(|c| c.probability).sum();
    let report = ChannelReport {
        channels,
        residual_probability: norm_sq - total,
        cut_positions: cuts,
        norm_sq,
        first_cut_spectrum: first,
        first_cut_support: supports,
        warnings,
    };
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(IsolationOutcome { report, states })
}
