//! Single-particle dispersion relations assembled from ring spectra.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ed::{ring_spectrum, RingHamiltonian, RingSpectrum, DEFAULT_ED_LIMIT};
use crate::error::{Error, Result};
use crate::ising::IsingCouplings;

/// Settings for the exact-diagonalization dispersion pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdSettings {
    pub lengths: Vec<usize>,
    /// Number of particle bands to extract (1 or 2).
    pub bands: usize,
    /// Levels computed per momentum sector.
    pub levels: usize,
    pub tolerance: f64,
    pub max_length: usize,
    /// Points on `[0, π]` of the output grid; the table covers `[-π, π]`.
    pub grid_points: usize,
    /// Cosine harmonics used for the second band, whose finite-ring data are
    /// too uneven near `k = 0` for exact interpolation.
    pub heavy_harmonics: usize,
}

impl Default for EdSettings {
    fn default() -> Self {
        Self {
            lengths: vec![12, 14, 16, 18],
            bands: 2,
            levels: 4,
            tolerance: 1e-11,
            max_length: DEFAULT_ED_LIMIT,
            grid_points: 513,
            heavy_harmonics: 4,
        }
    }
}

impl EdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::config("ed.lengths", "at least one ring length is required"));
        }
        if let Some(&l) = self.lengths.iter().find(|&&l| l < 6 || l > self.max_length || l % 2 == 1) {
            return Err(Error::config(
                "ed.lengths",
                format!("ring length {l} must be even and within 6..={}", self.max_length),
            ));
        }
        if !(1..=2).contains(&self.bands) {
            return Err(Error::config("ed.bands", "only one or two bands are supported"));
        }
        if self.levels < self.bands + 1 {
            return Err(Error::config("ed.levels", "need at least bands + 1 levels per sector"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("ed.tolerance", "must be positive"));
        }
        if self.grid_points < 3 {
            return Err(Error::config("ed.grid_points", "must be at least 3"));
        }
        Ok(())
    }
}

/// Even Fourier series `E(k)^2 = Σ_n a_n cos(n k)` for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandFit {
    pub coefficients: Vec<f64>,
}

impl BandFit {
    fn squared(&self, k: f64) -> f64 {
        self.coefficients.iter().enumerate().map(|(n, a)| a * (n as f64 * k).cos()).sum()
    }

    pub fn energy(&self, k: f64) -> f64 {
        self.squared(k).max(0.0).sqrt()
    }

    pub fn velocity(&self, k: f64) -> f64 {
        let d: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(n, a)| -a * n as f64 * (n as f64 * k).sin())
            .sum();
        d / (2.0 * self.energy(k))
    }

    /// Least-squares fit of `harmonics + 1` cosine terms to `(k, E)` samples.
    fn fit(samples: &[(f64, f64)], harmonics: usize) -> Result<Self> {
        use ndarray::{Array1, Array2};
        use ndarray_linalg::LeastSquaresSvd;
        let h = harmonics.min(samples.len().saturating_sub(1));
        let mut a = Array2::<f64>::zeros((samples.len(), h + 1));
        let mut b = Array1::<f64>::zeros(samples.len());
        for (i, &(k, e)) in samples.iter().enumerate() {
            for n in 0..=h {
                a[[i, n]] = (n as f64 * k).cos();
            }
            b[i] = e * e;
        }
        let sol = a.least_squares(&b)?;
        Ok(Self {
            coefficients: sol.solution.to_vec(),
        })
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// How the table was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSource {
    pub lengths: Vec<usize>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    pub k_grid: Vec<f64>,
    pub e1: Vec<f64>,
    /// NaN where the second particle was not resolved (`null` in JSON).
    #[serde(with = "nan_as_null")]
    pub e2: Vec<f64>,
    pub v1: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub v2: Vec<f64>,
    pub source: DispersionSource,
    pub band1: BandFit,
    pub band2: Option<BandFit>,
}

/// Particle species, 1 (lightest) or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Species {
    Light,
    Heavy,
}

impl From<Species> for u8 {
    fn from(s: Species) -> u8 {
        match s {
            Species::Light => 1,
            Species::Heavy => 2,
        }
    }
}

impl TryFrom<u8> for Species {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Species::Light),
            2 => Ok(Species::Heavy),
            _ => Err(format!("unknown species {v}")),
        }
    }
}

impl DispersionTable {
    pub fn band(&self, species: Species) -> Result<&BandFit> {
        match species {
            Species::Light => Ok(&self.band1),
            Species::Heavy => self
                .band2
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("second particle band not available".into())),
        }
    }

    pub fn energy(&self, species: Species, k: f64) -> Result<f64> {
        check_k(k)?;
        Ok(self.band(species)?.energy(k))
    }

    pub fn mass(&self, species: Species) -> Result<f64> {
        self.energy(species, 0.0)
    }

    /// Momentum above which two light particles can produce one light and one
    /// heavy particle: `2 E_1(k) = m_1 + m_2`.
    pub fn threshold_momentum(&self) -> Result<f64> {
        let target = 0.5 * (self.mass(Species::Light)? + self.mass(Species::Heavy)?);
        let f = |k: f64| self.band1.energy(k) - target;
        if f(PI) <= 0.0 {
            return Err(Error::InvalidArgument("inelastic threshold not reached on [0, π]".into()));
        }
        bisect(f, 0.0, PI, 1e-13)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "E1", "E2", "v1", "v2"])?;
        for i in 0..self.k_grid.len() {
            out.write_record(&[
                self.k_grid[i].to_string(),
                self.e1[i].to_string(),
                self.e2[i].to_string(),
                self.v1[i].to_string(),
                self.v2[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_k(k: f64) -> Result<()> {
    if !(k.abs() <= PI + 1e-12) {
        return Err(Error::InvalidArgument(format!("momentum {k} outside [-π, π]")));
    }
    Ok(())
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return Err(Error::InvalidArgument("root not bracketed".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm <= 0.0) == (flo <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Limit of `a + b e^{-c L}` fitted to `(L, y)` samples.
///
/// Falls back to the value at the largest `L` when the samples do not approach a
/// limit geometrically.
pub fn extrapolate_exponential(samples: &[(f64, f64)]) -> f64 {
    let last = samples.last().map(|s| s.1).unwrap_or(f64::NAN);
    if samples.len() < 3 {
        return last;
    }
    let n = samples.len();
    let d1 = samples[n - 1].1 - samples[n - 2].1;
    let d0 = samples[n - 2].1 - samples[n - 3].1;
    if d1 == 0.0 || d0 * d1 <= 0.0 || d1.abs() >= d0.abs() {
        return last;
    }
    // for fixed c the model is linear in (a, b); minimize the residual over c
    let residual = |c: f64| -> (f64, f64) {
        let xs: Vec<f64> = samples.iter().map(|s| (-c * (s.0 - samples[0].0)).exp()).collect();
        let (mx, my) = (
            xs.iter().sum::<f64>() / n as f64,
            samples.iter().map(|s| s.1).sum::<f64>() / n as f64,
        );
        let sxy: f64 = xs.iter().zip(samples).map(|(x, s)| (x - mx) * (s.1 - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let b = sxy / sxx;
        let a = my - b * mx;
        let r = xs.iter().zip(samples).map(|(x, s)| (a + b * x - s.1).powi(2)).sum();
        (r, a)
    };
    let span = samples[n - 1].0 - samples[0].0;
    let (mut lo, mut hi) = (1e-3 / span, 40.0 / span);
    let grid: Vec<f64> = (0..=200).map(|i| lo * (hi / lo).powf(i as f64 / 200.0)).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| residual(*a.1).0.total_cmp(&residual(*b.1).0))
        .map(|(i, _)| i)
        .unwrap();
    if best == 0 {
        return last;
    }
    lo = grid[best - 1];
    hi = grid[(best + 1).min(200)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if residual(x1).0 < residual(x2).0 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    residual(0.5 * (lo + hi)).1
}

/// Band energies of one ring at `k = 2π m / L`, `m = 0..=L/2`.
///
/// Band 1 is the lowest level in each sector (the second at `k = 0`, above the
/// vacuum). Band 2 is the next level, kept only where it lies below the
/// two-particle continuum `min_q E_1(q) + E_1(k - q)` on the same ring.
pub fn ring_bands(spec: &RingSpectrum) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let l = spec.length;
    let first = |m: usize| if m == 0 { 1 } else { 0 };
    let b1: Vec<f64> = (0..=l / 2).map(|m| spec.excitations(m)[first(m)]).collect();
    let e1 = |j: i64| b1[(j.rem_euclid(l as i64)).min(l as i64 - j.rem_euclid(l as i64)) as usize];
    let mut band1 = Vec::new();
    let mut band2 = Vec::new();
    for m in 0..=l / 2 {
        let k = spec.momentum(m);
        band1.push((k, b1[m]));
        let continuum = (0..l as i64).map(|j| e1(j) + e1(m as i64 - j)).fold(f64::INFINITY, f64::min);
        if let Some(&e) = spec.excitations(m).get(first(m) + 1) {
            if e < continuum - 1e-9 {
                band2.push((k, e));
            }
        }
    }
    (band1, band2)
}

fn assemble_band(per_length: &[(usize, Vec<(f64, f64)>)], grid: &[f64], cap: usize) -> Result<Option<BandFit>> {
    let usable: Vec<(usize, BandFit)> = per_length
        .iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(l, s)| BandFit::fit(s, (l / 2).min(cap)).map(|f| (*l, f)))
        .collect::<Result<_>>()?;
    if usable.is_empty() {
        return Ok(None);
    }
    let harmonics = usable.iter().map(|(_, f)| f.coefficients.len() - 1).max().unwrap_or(0);
    let samples: Vec<(f64, f64)> = grid
        .iter()
        .map(|&k| {
            let seq: Vec<(f64, f64)> = usable.iter().map(|(l, f)| (*l as f64, f.energy(k))).collect();
            (k, extrapolate_exponential(&seq))
        })
        .collect();
    BandFit::fit(&samples, harmonics).map(Some)
}

/// Dispersion relations from ring spectra at several lengths, extrapolated to
/// infinite length point by point and smoothed by a cosine series in `E^2`.
pub fn dispersion_from_ed(couplings: &IsingCouplings, settings: &EdSettings) -> Result<DispersionTable> {
    settings.validate()?;
    let mut lengths = settings.lengths.clone();
    lengths.sort_unstable();
    lengths.dedup();
    let mut band1 = Vec::new();
    let mut band2 = Vec::new();
    for &l in &lengths {
        let h = RingHamiltonian::new(couplings.g_x, couplings.g_z, l)?;
        let spec = ring_spectrum(&h, settings.levels, settings.tolerance, settings.max_length)?;
        let (b1, b2) = ring_bands(&spec);
        log::info!("ring L = {l}: m1 = {:.6}", b1[0].1);
        band1.push((l, b1));
        band2.push((l, b2));
    }
    let n = settings.grid_points;
    let half: Vec<f64> = (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect();
    let fit1 = assemble_band(&band1, &half, usize::MAX)?
        .ok_or_else(|| Error::InvalidArgument("no samples for the first band".into()))?;
    let fit2 = if settings.bands >= 2 {
        assemble_band(&band2, &half, settings.heavy_harmonics)?
    } else {
        None
    };
    let k_grid: Vec<f64> = (0..2 * n - 1).map(|i| -PI + PI * i as f64 / (n - 1) as f64).collect();
    let eval = |f: Option<&BandFit>, vel: bool| -> Vec<f64> {
        k_grid
            .iter()
            .map(|&k| match f {
                Some(f) if vel => f.velocity(k),
                Some(f) => f.energy(k),
                None => f64::NAN,
            })
            .collect()
    };
    Ok(DispersionTable {
        e1: eval(Some(&fit1), false),
        v1: eval(Some(&fit1), true),
        e2: eval(fit2.as_ref(), false),
        v2: eval(fit2.as_ref(), true),
        k_grid,
        source: DispersionSource {
            lengths,
            method: "periodic-ring ED per momentum sector; pointwise a + b exp(-c L) extrapolation; cosine series in E^2"
                .into(),
        },
        band1: fit1,
        band2: fit2,
    })
}

/// Momenta `k ∈ [-π, π]` with `v_j(k) = v`.
///
/// A velocity slightly beyond a local extremum of `v_j` (within `slack`) yields
/// the extremum's momentum, so that measured speeds near the maximum group
/// velocity still invert.
pub fn invert_velocity(table: &DispersionTable, species: Species, v: f64, slack: f64) -> Result<Vec<f64>> {
    let band = match table.band(species) {
        Ok(b) => b,
        Err(_) => return Ok(Vec::new()),
    };
    let steps = 4096;
    let ks: Vec<f64> = (0..=steps).map(|i| -PI + 2.0 * PI * i as f64 / steps as f64).collect();
    let f: Vec<f64> = ks.iter().map(|&k| band.velocity(k) - v).collect();
    let mut roots = Vec::new();
    for i in 0..steps {
        if f[i] == 0.0 {
            roots.push(ks[i]);
        } else if f[i] * f[i + 1] < 0.0 {
            roots.push(bisect(|k| band.velocity(k) - v, ks[i], ks[i + 1], 1e-14)?);
        }
    }
    if roots.is_empty() && slack > 0.0 {
        for i in 1..steps {
            let extremum = (f[i] - f[i - 1]) * (f[i + 1] - f[i]) < 0.0;
            if extremum && f[i].abs() <= slack * v.abs().max(1e-12) {
                let k = golden_extremum(|k| band.velocity(k), ks[i - 1], ks[i + 1], f[i] > f[i - 1]);
                roots.push(k);
            }
        }
    }
    Ok(roots)
}

fn golden_extremum(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, maximum: bool) -> f64 {
    let s = if maximum { -1.0 } else { 1.0 };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if s * f(a) < s * f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

pub fn group_velocity(table: &DispersionTable, species: Species, k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(table.band(species)?.velocity(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_table(g: f64) -> DispersionTable {
        let c = IsingCouplings::new(g, 0.0, 8).unwrap();
        let settings = EdSettings {
            lengths: vec![10, 12],
            bands: 1,
            ..Default::default()
        };
        dispersion_from_ed(&c, &settings).unwrap()
    }

    #[test]
    fn exponential_limit_recovered() {
        let s: Vec<(f64, f64)> = [10.0, 12.0, 14.0, 16.0].iter().map(|&l| (l, 3.0 - 2.0 * (-0.4f64 * l).exp())).collect();
        assert!((extrapolate_exponential(&s) - 3.0).abs() < 1e-8);
        let flat = [(10.0, 1.0), (12.0, 1.0), (14.0, 1.0)];
        assert_eq!(extrapolate_exponential(&flat), 1.0);
    }

    #[test]
    fn free_fermion_table() {
        let g = 1.25;
        let t = free_table(g);
        for (&k, &e) in t.k_grid.iter().zip(&t.e1) {
            let exact = 2.0 * (1.0 + g * g - 2.0 * g * k.cos()).sqrt();
            assert!((e - exact).abs() < 1e-7, "k = {k}");
        }
        assert!((t.mass(Species::Light).unwrap() - 0.5).abs() < 1e-8);
        assert!(t.band2.is_none());
        assert!(t.e2.iter().all(|x| x.is_nan()));
    }

    #[test]
    fn velocity_is_odd_and_matches_finite_difference() {
        let t = free_table(1.25);
        assert!(group_velocity(&t, Species::Light, 0.0).unwrap().abs() < 1e-12);
        for k in [0.3, 1.1, 2.0] {
            let v = group_velocity(&t, Species::Light, k).unwrap();
            assert!((v + group_velocity(&t, Species::Light, -k).unwrap()).abs() < 1e-12);
            let h = 1e-5;
            let fd = (t.energy(Species::Light, k + h).unwrap() - t.energy(Species::Light, k - h).unwrap()) / (2.0 * h);
            assert!((v - fd).abs() < 1e-4);
        }
        assert!(group_velocity(&t, Species::Light, 4.0).is_err());
    }

    #[test]
    fn velocity_round_trip() {
        let t = free_table(1.25);
        let vmax = t.v1.iter().cloned().fold(0.0, f64::max);
        for i in 1..100 {
            let v = -vmax + 2.0 * vmax * i as f64 / 100.0;
            let ks = invert_velocity(&t, Species::Light, v, 0.0).unwrap();
            assert!(!ks.is_empty());
            for k in ks {
                assert!((group_velocity(&t, Species::Light, k).unwrap() - v).abs() < 1e-6);
            }
        }
        assert!(invert_velocity(&t, Species::Light, 1.5 * vmax, 0.0).unwrap().is_empty());
        assert!(invert_velocity(&t, Species::Heavy, 0.1, 0.0).unwrap().is_empty());
    }
}
