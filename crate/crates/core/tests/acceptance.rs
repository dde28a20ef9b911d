//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! Criteria 7 and 8 take hours to days and are skipped unless the suite is
//! run with `--include-ignored` (or `--ignored`). Criterion 8 can instead
//! analyse a finished full-scale run: point `SCATTERLAB_FULL_RUN_DIR` at the
//! output directory of `scatterlab scatter configs/full.toml`.
//! Positional arguments select criteria by number.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scatterlab::config::RunConfig;
use scatterlab::dynamics::{evolve, EvolutionSchedule, SnapshotProbe};
use scatterlab::entanglement::{antiflatness, ChannelLabel};
use scatterlab::ising::build_trotter_gates;
use scatterlab::linalg::expm_hermitian;
use scatterlab::mps::io;
use scatterlab::pipeline;
use scatterlab::spectroscopy::ed::{ring_spectrum, RingHamiltonian, DEFAULT_ED_LIMIT};
use scatterlab::spectroscopy::{dispersion_from_ed, window_fourier_transform, EdSettings, Species};
use scatterlab::state_prep::wavepacket::{cascade_amplitudes, cascade_loaded, peak_index, w_state_angles};
use scatterlab::{IsingCouplings, MatrixProductState, SchmidtSpectrum, TruncationPolicy};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(pass: bool, detail: String) -> Verdict {
    if pass {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

struct Criterion {
    number: u32,
    name: &'static str,
    long: bool,
    run: fn() -> Verdict,
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn paper_couplings(length: usize) -> IsingCouplings {
    IsingCouplings::new(1.25, 0.15, length).unwrap()
}

fn free_fermion_energy(g: f64, k: f64) -> f64 {
    2.0 * (1.0 + g * g - 2.0 * g * k.cos()).sqrt()
}

fn free_fermion_dispersion() -> Verdict {
    let g = 1.25;
    let l = 12;
    let spec = ring_spectrum(&RingHamiltonian::new(g, 0.0, l).unwrap(), 2, 1e-12, DEFAULT_ED_LIMIT).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..=l / 2 {
        let k = spec.momentum(m);
        // at k = 0 the lowest level is the vacuum itself
        let level = if m == 0 { spec.excitations(0)[1] } else { spec.excitations(m)[0] };
        worst = worst.max((level - free_fermion_energy(g, k)).abs());
    }
    let settings = EdSettings {
        lengths: vec![l],
        bands: 1,
        max_length: l,
        ..EdSettings::default()
    };
    let table = dispersion_from_ed(&IsingCouplings::new(g, 0.0, 40).unwrap(), &settings).unwrap();
    let mut worst_table: f64 = 0.0;
    for m in -(l as i64 / 2) + 1..=l as i64 / 2 {
        let k = 2.0 * PI * m as f64 / l as f64;
        let e = table.energy(Species::Light, k).unwrap();
        worst_table = worst_table.max((e - free_fermion_energy(g, k)).abs());
    }
    verdict(
        worst <= 1e-8 && worst_table <= 1e-8,
        format!("L = 12 levels max error {worst:.1e}, fitted table {worst_table:.1e} (tol 1e-8)"),
    )
}

fn masses_and_threshold() -> Verdict {
    let started = Instant::now();
    let settings = EdSettings {
        lengths: vec![10, 12, 14, 16],
        max_length: 16,
        ..EdSettings::default()
    };
    let table = dispersion_from_ed(&paper_couplings(200), &settings).unwrap();
    let m1 = table.mass(Species::Light).unwrap();
    let m2 = table.mass(Species::Heavy).unwrap();
    let k = table.threshold_momentum().unwrap() / PI;
    let elapsed = started.elapsed();
    let ok = (m1 - 1.59).abs() <= 0.03
        && (m2 - 2.97).abs() <= 0.08
        && (k - 0.2412).abs() <= 0.005
        && elapsed <= Duration::from_secs(300);
    verdict(
        ok,
        format!(
            "L = 10..16: m1 = {m1:.4} (1.59 ± 0.03), m2 = {m2:.4} (2.97 ± 0.08), k_thr = {k:.4}π (0.2412π ± 0.005π), {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_dense(l: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..1usize << l)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ov.norm_sqr() / (na * nb)
}

fn oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let l = 10;
    let (dt, t) = (1.0 / 32.0, 2.0);
    let c = paper_couplings(l);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spins: Vec<u8> = (0..l).map(|n| ((n / 3) % 2) as u8).collect();
    let starts = [
        MatrixProductState::basis_state(&spins).unwrap(),
        MatrixProductState::from_dense(&random_dense(l, &mut rng), &TruncationPolicy::exact()).unwrap(),
    ];
    let u = expm_hermitian(&c.dense_hamiltonian().unwrap(), C64::new(0.0, -t)).unwrap();
    let gates = build_trotter_gates(&c, dt, 2, false).unwrap();
    let sched = EvolutionSchedule::uniform(t, dt, t, TruncationPolicy::exact());
    let mut worst: f64 = 1.0;
    for psi in starts {
        let exact = u.dot(&psi.to_dense(l).unwrap());
        let out = evolve(psi, &gates, &sched, &SnapshotProbe::new(c, None), |_, _| Ok(())).unwrap();
        let f = fidelity(exact.as_slice().unwrap(), out.state.to_dense(l).unwrap().as_slice().unwrap());
        worst = worst.min(f);
    }
    let elapsed = started.elapsed();
    verdict(
        worst >= 1.0 - 1e-6 && elapsed <= Duration::from_secs(60),
        format!("min fidelity 1 - {:.1e} (tol 1e-6), {:.1} s", 1.0 - worst, elapsed.as_secs_f64()),
    )
}

fn antiflatness_regression() -> Verdict {
    let rows: [(&str, &[f64], f64); 4] = [
        ("f", &[0.6620, 0.1570, 0.1431], 1.373e-3),
        ("11", &[0.5553], 8.7843e-4),
        ("12", &[0.1621], 7.4977e-5),
        ("21", &[0.1607], 7.3546e-5),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, values, expected) in rows {
        let spec = SchmidtSpectrum {
            cut_site: 0,
            values: values.to_vec(),
            chi: values.len(),
        };
        let f = antiflatness(&spec, 350).unwrap();
        worst = worst.max((f - expected).abs());
        parts.push(format!("|{name}> {f:.4e}"));
    }
    verdict(worst <= 2e-5, format!("{}; max deviation {worst:.1e} (tol 2e-5)", parts.join(", ")))
}

fn projection_bookkeeping() -> Verdict {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let strategy = (2usize..=10, any::<u64>(), 0.1f64..3.0);
    let result = runner.run(&strategy, |(l, seed, scale)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C64> = random_dense(l, &mut rng).into_iter().map(|a| a * scale).collect();
        let psi = MatrixProductState::from_dense(&amps, &TruncationPolicy::exact()).unwrap();
        let norm = psi.norm_sq();
        for cut in 0..l - 1 {
            let spec = psi.schmidt_spectrum(cut).unwrap();
            let mut sum = 0.0;
            for i in 0..spec.values.len() {
                sum += psi.project_schmidt_component(cut, &[i]).unwrap().state.norm_sq();
            }
            let err = (sum - norm).abs() / norm;
            worst.set(worst.get().max(err));
            prop_assert!(err <= 1e-12, "L = {l}, cut {cut}: relative error {err:e}");
        }
        Ok(())
    });
    let reference = match std::env::var_os("SCATTERLAB_FULL_RUN_DIR") {
        Some(_) => "reference snapshot checked under criterion 8",
        None => "reference-snapshot identity needs the full-scale run (criterion 8)",
    };
    match result {
        Ok(()) => Verdict::Pass(format!(
            "64 random states, L ≤ 10, every cut: max relative error {:.1e} (tol 1e-12); {reference}",
            worst.get()
        )),
        Err(e) => Verdict::Fail(e.to_string()),
    }
}

fn run_scatter_config(cfg: &RunConfig) -> (pipeline::ScatterRun, Duration) {
    let started = Instant::now();
    let vac = pipeline::run_vacuum(cfg).unwrap();
    let run = pipeline::run_scatter(cfg, &vac.state, |_, _| Ok(())).unwrap();
    (run, started.elapsed())
}

fn desk_below_threshold() -> Verdict {
    let cfg = config("desk-below.toml");
    let (run, elapsed) = run_scatter_config(&cfg);
    let last = run.outcome.snapshots.last().unwrap();
    let summary = pipeline::summarize(last, cfg.nominal_chi()).unwrap();
    let big: Vec<f64> = last.midpoint_spectrum.values.iter().copied().filter(|&v| v > 0.05).collect();
    verdict(
        big.len() == 1 && elapsed <= Duration::from_secs(1800),
        format!(
            "t = {}: midpoint values above 0.05 {:?} (want exactly 1), norm² {:.4}, mirror defect {:.1e}, {:.1} min",
            last.t,
            big,
            last.norm_sq,
            summary.parity_defect,
            elapsed.as_secs_f64() / 60.0
        ),
    )
}

fn desk_above_threshold() -> Verdict {
    let cfg = config("desk-above.toml");
    let started = Instant::now();
    let vac = pipeline::run_vacuum(&cfg).unwrap();
    let run = pipeline::run_scatter(&cfg, &vac.state, |_, _| Ok(())).unwrap();
    let last = run.outcome.snapshots.last().unwrap();
    let big = last.midpoint_spectrum.count_above(0.05);
    let mut problems = Vec::new();
    if big < 3 {
        problems.push(format!("{big} midpoint values above 0.05"));
    }
    let mut outcome = match pipeline::isolate(&cfg, &run.outcome.state, &run.vacuum_profile) {
        Ok(o) => o,
        Err(e) => return Verdict::Fail(format!("isolation failed: {e}")),
    };
    let p = |label| outcome.report.probability(label);
    let (p11, p12, p21) = (p(ChannelLabel::Elastic), p(ChannelLabel::LightLeft), p(ChannelLabel::LightRight));
    if p11 == 0.0 || p12 == 0.0 || p21 == 0.0 {
        problems.push("missing a labeled channel".into());
    }
    let balance = (p12 - p21).abs() / (0.5 * (p12 + p21)).max(f64::MIN_POSITIVE);
    if balance > 0.15 {
        problems.push(format!("parity balance {balance:.3}"));
    }
    let table = dispersion_from_ed(&cfg.couplings, &cfg.ed).unwrap();
    let t_final = last.t;
    match pipeline::classify_channels(&cfg, &mut outcome, &run.vacuum_profile, &table, t_final) {
        Ok(_) => {
            for label in [ChannelLabel::LightLeft, ChannelLabel::LightRight] {
                let Some(ch) = outcome.report.channels.iter().find(|c| c.label == label) else {
                    continue;
                };
                let heavy: Vec<_> =
                    ch.classification.iter().filter(|r| r.chosen_species == Species::Heavy).collect();
                if heavy.len() != 1 || heavy.iter().any(|r| r.relative_error > 0.15) {
                    problems.push(format!(
                        "channel {} has {} heavy excitations (errors {:?})",
                        label.as_str(),
                        heavy.len(),
                        heavy.iter().map(|r| r.relative_error).collect::<Vec<_>>()
                    ));
                }
            }
        }
        Err(e) => problems.push(format!("classification failed: {e}")),
    }
    let elapsed = started.elapsed();
    let detail = format!(
        "{big} midpoint values above 0.05; P(11) = {p11:.4}, P(12) = {p12:.4}, P(21) = {p21:.4}, balance {balance:.3}; {:.1} h{}",
        elapsed.as_secs_f64() / 3600.0,
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    verdict(problems.is_empty(), detail)
}

fn full_scale() -> Verdict {
    let cfg = config("full.toml");
    let (final_state, vacuum, norms) = match std::env::var_os("SCATTERLAB_FULL_RUN_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let load = |n: &str| io::load(&dir.join(n)).unwrap_or_else(|e| panic!("{n}: {e}"));
            let norms: Vec<(f64, f64)> = std::fs::read_to_string(dir.join("diagnostics.jsonl"))
                .unwrap()
                .lines()
                .map(|l| {
                    let s: pipeline::SnapshotSummary = serde_json::from_str(l).unwrap();
                    (s.t, s.norm_sq)
                })
                .collect();
            (load("final.mps"), load("vacuum.mps"), norms)
        }
        None => {
            let vac = pipeline::run_vacuum(&cfg).unwrap();
            let run = pipeline::run_scatter(&cfg, &vac.state, |_, _| Ok(())).unwrap();
            let norms = run.outcome.snapshots.iter().map(|s| (s.t, s.norm_sq)).collect();
            (run.outcome.state, vac.state, norms)
        }
    };
    let profile = cfg.couplings.vacuum_profile(&vacuum).unwrap();
    let outcome = pipeline::isolate(&cfg, &final_state, &profile).unwrap();
    let p11 = outcome.report.probability(ChannelLabel::Elastic);
    let p12 = outcome.report.inelastic_probability();
    // the norm at t = 40 is the last snapshot before the bond dimension drops
    let norm40 = norms.iter().rev().find(|(t, _)| *t <= 40.0 + 1e-9).map_or(f64::NAN, |x| x.1);
    let first = &outcome.report.first_cut_spectrum;
    // the intermediate state recombining the fast-left components has the summed weight of its Schmidt values
    let identity = outcome.report.channels.iter().find(|c| c.label == ChannelLabel::Elastic).map(|c| {
        let parts: Vec<f64> = c.first_cut_indices.iter().map(|&i| first.values[i]).collect();
        (parts.clone(), parts.iter().sum::<f64>(), c.spectrum_used.total())
    });
    let identity_ok = identity.as_ref().is_some_and(|(_, sum, norm)| (sum - norm).abs() <= 1e-10);
    let ok = (p11 - 0.5638).abs() <= 0.02
        && (p12 - 0.3395).abs() <= 0.02
        && (norm40 - 0.9928).abs() <= 0.003
        && identity_ok;
    verdict(
        ok,
        format!(
            "P(11) = {p11:.4} (0.5638 ± 0.02), P(12) + P(21) = {p12:.4} (0.3395 ± 0.02), norm² at t = 40 {norm40:.4} (0.9928 ± 0.003); first-cut weights {:?} sum to the recombined norm {:?}",
            identity.as_ref().map(|x| x.0.clone()).unwrap_or_default(),
            identity.as_ref().map(|x| x.2)
        ),
    )
}

fn angle_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa9);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(1..=41);
        let raw: Vec<C64> = (0..d)
            .map(|_| C64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(-PI..PI)))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<C64> = raw.iter().map(|a| a / norm).collect();
        let mags: Vec<f64> = amps.iter().map(|a| a.norm()).collect();
        let peak = peak_index(&mags);
        let back = cascade_amplitudes(&w_state_angles(&mags, peak).unwrap(), peak);
        let loaded = cascade_loaded(&amps).unwrap();
        for i in 0..d {
            worst = worst.max((back[i] - mags[i]).abs()).max((loaded[i] - amps[i]).norm());
        }
    }
    verdict(worst <= 1e-12, format!("200 random vectors: max amplitude error {worst:.1e} (tol 1e-12)"))
}

fn windowed_fourier_table() -> Verdict {
    let h = 0.5;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::i();
    let one = C64::new(1.0, 0.0);
    let b = |s: &str| usize::from_str_radix(s, 2).unwrap();
    // (input, [(coefficient, output)])
    let orbit4 = |members: [&str; 4]| {
        let phases: [[C64; 4]; 4] = [
            [one, one, one, one],
            [one, i, -one, -i],
            [one, -one, one, -one],
            [one, -i, -one, i],
        ];
        (0..4)
            .map(|j| {
                (
                    members[j].to_string(),
                    (0..4).map(|m| (phases[j][m] * h, members[m].to_string())).collect::<Vec<_>>(),
                )
            })
            .collect::<Vec<_>>()
    };
    let mut rows = vec![("0000".to_string(), vec![(one, "0000".to_string())])];
    rows.extend(orbit4(["0001", "0010", "0100", "1000"]));
    rows.extend(orbit4(["0011", "0110", "1100", "1001"]));
    rows.push(("0101".into(), vec![(one * r, "0101".into()), (one * r, "1010".into())]));
    rows.push(("1010".into(), vec![(one * r, "0101".into()), (-one * r, "1010".into())]));
    rows.extend(orbit4(["0111", "1110", "1101", "1011"]));
    rows.push(("1111".into(), vec![(one, "1111".into())]));
    let mut expected = Array2::<C64>::zeros((16, 16));
    for (input, terms) in &rows {
        for (c, out) in terms {
            expected[[b(out), b(input)]] = *c;
        }
    }
    let v = window_fourier_transform(4).unwrap();
    let worst = (&v - &expected).iter().map(|x| x.norm()).fold(0.0, f64::max);
    verdict(
        rows.len() == 16 && worst <= 1e-12,
        format!("{} table rows, max entry deviation {worst:.1e} (tol 1e-12)", rows.len()),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include_long = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion { number: 1, name: "free-fermion dispersion", long: false, run: free_fermion_dispersion },
        Criterion { number: 2, name: "masses and threshold", long: false, run: masses_and_threshold },
        Criterion { number: 3, name: "dense oracle equivalence", long: false, run: oracle_equivalence },
        Criterion { number: 4, name: "antiflatness regression", long: false, run: antiflatness_regression },
        Criterion { number: 5, name: "projection bookkeeping", long: false, run: projection_bookkeeping },
        Criterion { number: 6, name: "desk-scale below threshold", long: false, run: desk_below_threshold },
        Criterion { number: 7, name: "desk-scale above threshold", long: true, run: desk_above_threshold },
        Criterion { number: 8, name: "full-scale reproduction", long: true, run: full_scale },
        Criterion { number: 9, name: "angle-solver round trip", long: false, run: angle_round_trip },
        Criterion { number: 10, name: "windowed Fourier table", long: false, run: windowed_fourier_table },
    ];
    let mut failed = 0;
    for c in criteria {
        if !selected.is_empty() && !selected.contains(&c.number) {
            continue;
        }
        let full_dir = c.number == 8 && std::env::var_os("SCATTERLAB_FULL_RUN_DIR").is_some();
        let v = if c.long && !include_long && !full_dir {
            Verdict::Skip("long-running; pass --include-ignored to run".into())
        } else {
            match std::panic::catch_unwind(c.run) {
                Ok(v) => v,
                Err(e) => Verdict::Fail(format!(
                    "panicked: {}",
                    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
                )),
            }
        };
        let (tag, detail) = match &v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} [{tag}] {}: {detail}", c.number, c.name);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
