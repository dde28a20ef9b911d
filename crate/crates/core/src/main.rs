use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use scatterlab::config::{RunConfig, OUTPUT_DIR_ENV, THREADS_ENV};
use scatterlab::entanglement::{ChannelReport, IsolationOutcome};
use scatterlab::mps::io;
use scatterlab::pipeline::{self, EntanglementRow, SnapshotSummary};
use scatterlab::spectroscopy::{DispersionTable, Species};
use scatterlab::{Error, ErrorClass, MatrixProductState, Result};

#[derive(Parser)]
#[command(name = "scatterlab", version, about = "Wavepacket scattering in the tilted-field Ising chain")]
struct Cli {
    /// Output directory (overrides the config file).
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Worker threads for parallel kernels and sweeps.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    config: PathBuf,
}

#[derive(Args)]
struct VacuumArg {
    /// Vacuum snapshot; defaults to `vacuum.mps` in the output directory,
    /// recomputed when absent.
    #[arg(long)]
    vacuum: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config, printing it with defaults filled in.
    Validate(ConfigArg),
    /// Ground state of the open chain.
    Vacuum(ConfigArg),
    /// Dispersion relations from exact diagonalization on rings.
    Dispersion(ConfigArg),
    /// Prepare two wavepackets and evolve them through the collision.
    Scatter {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        vacuum: VacuumArg,
    },
    /// Split a final state into exclusive channels.
    Isolate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        vacuum: VacuumArg,
        /// Final state; defaults to `final.mps` in the output directory.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Skip particle classification of the channels.
        #[arg(long)]
        no_classify: bool,
    },
    /// Classify the outgoing excitations of previously isolated channels.
    Classify {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        vacuum: VacuumArg,
        /// Time of the analysed snapshot; defaults to `evolution.t_end`.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Scatter at several incoming momenta in parallel and tabulate the
    /// final midpoint entanglement.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        vacuum: VacuumArg,
        /// Incoming momenta in units of π.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<f64>,
    },
    /// Check every known output file in a directory against its schema.
    Check {
        /// Directory to check; defaults to the output directory.
        dir: Option<PathBuf>,
    },
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Physics => 4,
        ErrorClass::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli, path: &Path) -> Result<Self> {
        let cfg = RunConfig::load(path)?;
        let out = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn vacuum(&self, arg: &VacuumArg) -> Result<MatrixProductState> {
        let path = arg.vacuum.clone().unwrap_or_else(|| self.path("vacuum.mps"));
        if path.exists() {
            let vac = io::load(&path)?;
            if vac.len() != self.cfg.couplings.length {
                return Err(Error::LengthMismatch {
                    left: vac.len(),
                    right: self.cfg.couplings.length,
                });
            }
            return Ok(vac);
        }
        if arg.vacuum.is_some() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} not found", path.display()),
            )));
        }
        self.compute_vacuum()
    }

    fn compute_vacuum(&self) -> Result<MatrixProductState> {
        let vac = pipeline::run_vacuum(&self.cfg)?;
        io::save(&vac.state, &self.path("vacuum.mps"))?;
        write_json(
            &self.path("vacuum.json"),
            &VacuumSummary {
                length: vac.state.len(),
                energy: vac.energy,
                variance: vac.variance,
                sweeps: vac.sweeps,
                max_bond: vac.state.max_bond(),
            },
        )?;
        Ok(vac.state)
    }

    fn dispersion(&self) -> Result<DispersionTable> {
        let path = self.path("dispersion.json");
        if path.exists() {
            return Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?);
        }
        let table = pipeline::run_dispersion(&self.cfg)?;
        write_dispersion(self, &table)?;
        Ok(table)
    }
}

#[derive(Serialize, serde::Deserialize)]
struct VacuumSummary {
    length: usize,
    energy: f64,
    variance: f64,
    sweeps: usize,
    max_bond: usize,
}

#[derive(Serialize, serde::Deserialize)]
struct DispersionSummary {
    m1: f64,
    m2: Option<f64>,
    k_thr_over_pi: Option<f64>,
}

#[derive(Serialize, serde::Deserialize)]
struct ScatterSummary {
    t_final: f64,
    initial_excitation_energy: f64,
    final_norm_sq: f64,
    norm_retained: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_dispersion(ctx: &Context, table: &DispersionTable) -> Result<DispersionSummary> {
    table.write_csv(BufWriter::new(File::create(ctx.path("dispersion.csv"))?))?;
    write_json(&ctx.path("dispersion.json"), table)?;
    let summary = DispersionSummary {
        m1: table.mass(Species::Light)?,
        m2: table.mass(Species::Heavy).ok(),
        k_thr_over_pi: table.threshold_momentum().ok().map(|k| k / std::f64::consts::PI),
    };
    write_json(&ctx.path("dispersion_summary.json"), &summary)?;
    Ok(summary)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => {
            let cfg = RunConfig::load(&a.config)?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::Vacuum(a) => {
            let ctx = Context::new(cli, &a.config)?;
            ctx.compute_vacuum()?;
            println!("vacuum written to {}", ctx.path("vacuum.mps").display());
            Ok(())
        }
        Command::Dispersion(a) => {
            let ctx = Context::new(cli, &a.config)?;
            let table = pipeline::run_dispersion(&ctx.cfg)?;
            let s = write_dispersion(&ctx, &table)?;
            print!("m1 = {:.4}", s.m1);
            if let (Some(m2), Some(k)) = (s.m2, s.k_thr_over_pi) {
                print!("  m2 = {m2:.4}  k_thr = {k:.4}π");
            }
            println!();
            Ok(())
        }
        Command::Scatter { config, vacuum } => {
            let ctx = Context::new(cli, &config.config)?;
            scatter(&ctx, vacuum)
        }
        Command::Isolate {
            config,
            vacuum,
            state,
            no_classify,
        } => {
            let ctx = Context::new(cli, &config.config)?;
            let state = state.clone().unwrap_or_else(|| ctx.path("final.mps"));
            isolate(&ctx, vacuum, &state, !no_classify)
        }
        Command::Classify { config, vacuum, time } => {
            let ctx = Context::new(cli, &config.config)?;
            classify(&ctx, vacuum, time.unwrap_or(ctx.cfg.evolution.t_end))
        }
        Command::Sweep { config, vacuum, k } => {
            let ctx = Context::new(cli, &config.config)?;
            sweep(&ctx, vacuum, k)
        }
        Command::Check { dir } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => cli.output_dir.clone().ok_or_else(|| {
                    Error::InvalidArgument(format!("give a directory or set {OUTPUT_DIR_ENV}"))
                })?,
            };
            check(&dir)
        }
    }
}

fn scatter(ctx: &Context, vacuum: &VacuumArg) -> Result<()> {
    let vac = ctx.vacuum(vacuum)?;
    let chi = ctx.cfg.nominal_chi();
    let mut energy = csv::Writer::from_writer(BufWriter::new(File::create(ctx.path("energy_density.csv"))?));
    energy.write_record(["t", "n", "E"])?;
    let mut diag = BufWriter::new(File::create(ctx.path("diagnostics.jsonl"))?);
    let run = pipeline::run_scatter(&ctx.cfg, &vac, |rec, _| {
        for (n, e) in rec.energy_density.iter().enumerate() {
            energy.serialize((rec.t, n, e))?;
        }
        let s = pipeline::summarize(rec, chi)?;
        log::info!(
            "t = {:.2}  norm² = {:.6}  χ = {}  significant midpoint values {:?}",
            s.t,
            s.norm_sq,
            s.max_bond,
            s.midpoint_significant
        );
        serde_json::to_writer(&mut diag, &s)?;
        writeln!(diag)?;
        Ok(())
    })?;
    energy.flush()?;
    diag.flush()?;
    let last = &run.outcome.state;
    let t_final = run.outcome.snapshots.last().map_or(0.0, |s| s.t);
    io::save(last, &ctx.path("final.mps"))?;
    write_json(
        &ctx.path("scatter.json"),
        &ScatterSummary {
            t_final,
            initial_excitation_energy: run.initial_excitation_energy,
            final_norm_sq: last.norm_sq(),
            norm_retained: run.prepared.norm_retained.clone(),
        },
    )?;
    println!(
        "evolved to t = {} (norm² {:.6}); final state in {}",
        t_final,
        last.norm_sq(),
        ctx.path("final.mps").display()
    );
    Ok(())
}

fn write_channels(ctx: &Context, outcome: &IsolationOutcome, profile: &[f64]) -> Result<()> {
    write_json(&ctx.path("channels.json"), &outcome.report)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(ctx.path("channel_energy.csv"))?));
    w.write_record(["channel", "label", "n", "E"])?;
    for (i, (rec, state)) in outcome.report.channels.iter().zip(&outcome.states).enumerate() {
        let ns = state.norm_sq();
        for (n, e) in ctx.cfg.couplings.energy_density_against(state, profile)?.iter().enumerate() {
            w.serialize((i, rec.label.as_str(), n, e / ns))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_entanglement(path: &Path, rows: &[EntanglementRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["state", "entropy", "antiflatness", "lambda_0", "lambda_1", "lambda_2", "lambda_3"])?;
    for r in rows {
        let mut rec = vec![r.state.clone(), r.entropy.to_string(), r.antiflatness.to_string()];
        rec.extend((0..4).map(|i| r.significant.get(i).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn isolate(ctx: &Context, vacuum: &VacuumArg, state: &Path, classify_too: bool) -> Result<()> {
    let vac = ctx.vacuum(vacuum)?;
    let profile = ctx.cfg.couplings.vacuum_profile(&vac)?;
    let psi = io::load(state)?;
    let mut outcome = pipeline::isolate(&ctx.cfg, &psi, &profile)?;
    let chi = ctx.cfg.nominal_chi();
    let mut rows = vec![pipeline::midpoint_entanglement("f", &psi, chi)?];
    for (i, (rec, s)) in outcome.report.channels.iter().zip(&outcome.states).enumerate() {
        io::save(s, &ctx.path(&format!("channel_{i}.mps")))?;
        let mut s = s.clone();
        s.normalize()?;
        rows.push(pipeline::midpoint_entanglement(rec.label.as_str(), &s, chi)?);
    }
    write_entanglement(&ctx.path("entanglement.csv"), &rows)?;
    write_channels(ctx, &outcome, &profile)?;
    if classify_too {
        let table = ctx.dispersion()?;
        match pipeline::classify_channels(&ctx.cfg, &mut outcome, &profile, &table, ctx.cfg.evolution.t_end) {
            Ok(records) => write_classification(ctx, &records)?,
            Err(e) if e.class() == ErrorClass::Physics => outcome.report.warnings.push(e.to_string()),
            Err(e) => return Err(e),
        }
        write_json(&ctx.path("channels.json"), &outcome.report)?;
    }
    for c in &outcome.report.channels {
        println!("{:>13}  P = {:.4}", c.label.as_str(), c.probability);
    }
    println!("{:>13}  P = {:.4}", "residual", outcome.report.residual_probability);
    for w in &outcome.report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

fn write_classification(ctx: &Context, records: &[scatterlab::spectroscopy::ClassificationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(ctx.path("classification.csv"))?));
    w.write_record([
        "excitation",
        "velocity",
        "packet_energy",
        "species",
        "k_over_pi",
        "energy",
        "relative_error",
    ])?;
    for r in records {
        w.serialize((
            &r.excitation_label,
            r.measured_velocity,
            r.packet_energy,
            u8::from(r.chosen_species),
            r.chosen_momentum / std::f64::consts::PI,
            r.chosen_energy,
            r.relative_error,
        ))?;
        println!(
            "{:>16}  v = {:+.4}  E = {:.4}  species {}  k = {:.4}π  error {:.1}%",
            r.excitation_label,
            r.measured_velocity,
            r.packet_energy,
            u8::from(r.chosen_species),
            r.chosen_momentum / std::f64::consts::PI,
            100.0 * r.relative_error
        );
    }
    w.flush()?;
    Ok(())
}

fn classify(ctx: &Context, vacuum: &VacuumArg, t_final: f64) -> Result<()> {
    let vac = ctx.vacuum(vacuum)?;
    let profile = ctx.cfg.couplings.vacuum_profile(&vac)?;
    let mut report: ChannelReport = serde_json::from_reader(BufReader::new(File::open(ctx.path("channels.json"))?))?;
    for c in &mut report.channels {
        c.classification.clear();
    }
    let states = (0..report.channels.len())
        .map(|i| io::load(&ctx.path(&format!("channel_{i}.mps"))))
        .collect::<Result<Vec<_>>>()?;
    let mut outcome = IsolationOutcome { report, states };
    let table = ctx.dispersion()?;
    let records = pipeline::classify_channels(&ctx.cfg, &mut outcome, &profile, &table, t_final)?;
    write_classification(ctx, &records)?;
    write_json(&ctx.path("channels.json"), &outcome.report)
}

#[derive(Serialize)]
struct SweepRow {
    k_over_pi: f64,
    t: f64,
    entropy: f64,
    antiflatness: f64,
    significant: usize,
    norm_sq: f64,
}

fn sweep(ctx: &Context, vacuum: &VacuumArg, ks: &[f64]) -> Result<()> {
    let vac = ctx.vacuum(vacuum)?;
    let chi = ctx.cfg.nominal_chi();
    let results = ks
        .par_iter()
        .map(|&k| {
            let mut cfg = ctx.cfg.clone();
            cfg.packet.k_over_pi = k;
            let mut last: Option<SnapshotSummary> = None;
            pipeline::run_scatter(&cfg, &vac, |rec, _| {
                last = Some(pipeline::summarize(rec, chi)?);
                Ok(())
            })?;
            let s = last.ok_or_else(|| Error::InvalidArgument("evolution produced no snapshot".into()))?;
            Ok((k, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(ctx.path("sweep.csv"))?));
    let mut jsonl = BufWriter::new(File::create(ctx.path("sweep.jsonl"))?);
    for (k, s) in results {
        let row = SweepRow {
            k_over_pi: k,
            t: s.t,
            entropy: s.midpoint_entropy,
            antiflatness: s.midpoint_antiflatness,
            significant: s.midpoint_significant.len(),
            norm_sq: s.norm_sq,
        };
        println!(
            "k = {:.3}π  S = {:.4}  F = {:.3e}  {} significant",
            k, row.entropy, row.antiflatness, row.significant
        );
        w.serialize(&row)?;
        serde_json::to_writer(&mut jsonl, &s)?;
        writeln!(jsonl)?;
    }
    w.flush()?;
    jsonl.flush()?;
    Ok(())
}

fn check_csv(path: &Path, header: &[&str], numeric_from: usize) -> Result<usize> {
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Format(format!("header {got:?}, expected {header:?}")));
    }
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!("row {} has {} fields", rows + 1, rec.len())));
        }
        for f in rec.iter().skip(numeric_from).filter(|f| !f.is_empty()) {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: `{f}` is not a number", rows + 1)))?;
        }
        rows += 1;
    }
    Ok(rows)
}

fn check_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<usize> {
    let mut n = 0;
    for line in BufReader::new(File::open(path)?).lines() {
        serde_json::from_str::<T>(&line?)?;
        n += 1;
    }
    Ok(n)
}

fn check_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn check_report(path: &Path) -> Result<usize> {
    let r: ChannelReport = check_json(path)?;
    let total: f64 = r.channels.iter().map(|c| c.probability).sum::<f64>() + r.residual_probability;
    if r.channels.iter().any(|c| !(c.probability >= 0.0)) {
        return Err(Error::Format("negative channel probability".into()));
    }
    if (total - r.norm_sq).abs() > 1e-8 * r.norm_sq.max(1.0) {
        return Err(Error::Format(format!("probabilities sum to {total}, norm² is {}", r.norm_sq)));
    }
    Ok(r.channels.len())
}

fn check(dir: &Path) -> Result<()> {
    let mut checked = 0;
    let mut failed = 0;
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let outcome = match name.as_str() {
            "energy_density.csv" => check_csv(&path, &["t", "n", "E"], 0).map(|n| format!("{n} rows")),
            "channel_energy.csv" => check_csv(&path, &["channel", "label", "n", "E"], 2).map(|n| format!("{n} rows")),
            "dispersion.csv" => check_csv(&path, &["k", "E1", "E2", "v1", "v2"], 0).map(|n| format!("{n} rows")),
            "sweep.csv" => check_csv(
                &path,
                &["k_over_pi", "t", "entropy", "antiflatness", "significant", "norm_sq"],
                0,
            )
            .map(|n| format!("{n} rows")),
            "entanglement.csv" => check_csv(
                &path,
                &["state", "entropy", "antiflatness", "lambda_0", "lambda_1", "lambda_2", "lambda_3"],
                1,
            )
            .map(|n| format!("{n} rows")),
            "classification.csv" => check_csv(
                &path,
                &[
                    "excitation",
                    "velocity",
                    "packet_energy",
                    "species",
                    "k_over_pi",
                    "energy",
                    "relative_error",
                ],
                1,
            )
            .map(|n| format!("{n} rows")),
            "diagnostics.jsonl" | "sweep.jsonl" => check_jsonl::<SnapshotSummary>(&path).map(|n| format!("{n} lines")),
            "channels.json" => check_report(&path).map(|n| format!("{n} channels")),
            "dispersion.json" => check_json::<DispersionTable>(&path).map(|t| format!("{} grid points", t.k_grid.len())),
            "dispersion_summary.json" => check_json::<DispersionSummary>(&path).map(|_| "ok".into()),
            "vacuum.json" => check_json::<VacuumSummary>(&path).map(|_| "ok".into()),
            "scatter.json" => check_json::<ScatterSummary>(&path).map(|_| "ok".into()),
            n if n.ends_with(".mps") => io::load(&path).map(|s| format!("{} sites, χ = {}", s.len(), s.max_bond())),
            _ => continue,
        };
        checked += 1;
        match outcome {
            Ok(msg) => println!("ok    {name}: {msg}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    if checked == 0 {
        return Err(Error::Format(format!("no known output files in {}", dir.display())));
    }
    if failed > 0 {
        return Err(Error::Format(format!("{failed} of {checked} files failed the schema check")));
    }
    Ok(())
}
