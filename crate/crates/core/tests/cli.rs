use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scatterlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatterlab"))
        .args(args)
        .env("SCATTERLAB_OUTPUT_DIR", out)
        .env("SCATTERLAB_THREADS", "1")
        .output()
        .expect("run scatterlab")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[couplings]
g_x = 1.25
g_z = 0.15
length = 24

[packet]
k_over_pi = 0.36
sigma_k_over_pi = 0.3
d = 5

[evolution]
dt = 0.0625
t_end = 9.0
snapshot_interval = 1.0
stages = [{ t_from = 0.0, max_bond = 32, cutoff = 1e-10 }]

[isolation]
n_l = "auto"
n_r = "auto"
margin = 1

[ed]
lengths = [8, 10]
max_length = 10
"#;

#[test]
fn validation_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", SMALL);
    let o = scatterlab(dir.path(), &["validate", &ok]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[evolution]"));

    let missing = write(dir.path(), "missing.toml", "seed = 3\n");
    let o = scatterlab(dir.path(), &["validate", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("couplings"), "{}", stderr(&o));

    let bad = write(dir.path(), "bad.toml", &SMALL.replace("dt = 0.0625", "dt = -1.0"));
    let o = scatterlab(dir.path(), &["validate", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("evolution.dt"), "{}", stderr(&o));

    let unknown = write(dir.path(), "unknown.toml", &format!("{SMALL}\n[extra]\nx = 1\n"));
    assert_eq!(scatterlab(dir.path(), &["validate", &unknown]).status.code(), Some(2));
}

#[test]
fn free_fermion_dispersion_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ff.toml",
        "[couplings]\ng_x = 1.25\ng_z = 0.0\nlength = 40\n[packet]\nd = 5\n[ed]\nlengths = [10, 12]\nmax_length = 12\nbands = 1\n",
    );
    let o = scatterlab(dir.path(), &["dispersion", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dispersion_summary.json")).unwrap()).unwrap();
    assert!((s["m1"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!(s["m2"].is_null());
    assert!(scatterlab(dir.path(), &["check", dir.path().to_str().unwrap()]).status.success());
}

#[test]
fn scatter_isolate_classify_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    for cmd in ["scatter", "isolate", "classify"] {
        let o = scatterlab(dir.path(), &[cmd, &cfg]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    for f in [
        "vacuum.mps",
        "final.mps",
        "energy_density.csv",
        "diagnostics.jsonl",
        "channels.json",
        "channel_energy.csv",
        "entanglement.csv",
        "classification.csv",
        "dispersion.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }

    // mirror-symmetric packets keep a mirror-symmetric energy density
    for line in fs::read_to_string(dir.path().join("diagnostics.jsonl")).unwrap().lines() {
        let d: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(d["parity_defect"].as_f64().unwrap() < 1e-4, "{line}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("channels.json")).unwrap()).unwrap();
    let total: f64 = report["channels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["probability"].as_f64().unwrap())
        .sum::<f64>()
        + report["residual_probability"].as_f64().unwrap();
    assert!((total - report["norm_sq"].as_f64().unwrap()).abs() < 1e-8);
    assert_eq!(report["channels"][0]["label"], "11");

    let o = scatterlab(dir.path(), &["check", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));

    fs::write(dir.path().join("energy_density.csv"), "t,n,E\n0,1,oops\n").unwrap();
    let o = scatterlab(dir.path(), &["check", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  energy_density.csv"));
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = SMALL.replace("t_end = 9.0", "t_end = 2.0");
    for d in [&a, &b] {
        let cfg = write(d.path(), "c.toml", &text);
        assert!(scatterlab(d.path(), &["scatter", &cfg]).status.success());
    }
    for f in ["energy_density.csv", "final.mps"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn norm_floor_breach_aborts_with_numerical_exit() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("max_bond = 32", "max_bond = 2")
        .replace("[evolution]", "[evolution]\nnorm_floor = 0.9");
    let cfg = write(dir.path(), "chi2.toml", &text);
    let o = scatterlab(dir.path(), &["scatter", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("norm floor"), "{}", stderr(&o));
}

#[test]
fn sweep_tabulates_each_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &SMALL.replace("t_end = 9.0", "t_end = 1.0"));
    let o = scatterlab(dir.path(), &["sweep", &cfg, "--k", "0.2,0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("k_over_pi,t,entropy,antiflatness,significant,norm_sq"));
}
