use std::ffi::{CStr, CString};
use std::ptr;

use scatterlab_ffi::*;

const TINY: &str = r#"
[couplings]
g_x = 1.25
g_z = 0.0
length = 12

[packet]
k_over_pi = 0.36
sigma_k_over_pi = 0.3
d = 3

[evolution]
dt = 0.125
t_end = 0.5
stages = [{ t_from = 0.0, max_bond = 16, cutoff = 1e-10 }]

[ed]
lengths = [10, 12]
max_length = 12
bands = 1
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(scatterlab_last_error()) }.to_string_lossy().into_owned()
}

fn config(text: &str) -> (ScatterlabStatus, *mut ScatterlabConfig) {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { scatterlab_config_from_toml(text.as_ptr(), &mut cfg) };
    (st, cfg)
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(scatterlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_and_invalid_arguments_are_reported() {
    let mut n = 0usize;
    assert_eq!(unsafe { scatterlab_config_length(ptr::null(), &mut n) }, ScatterlabStatus::NullPointer);
    assert!(last_error().contains("cfg"));

    let (st, cfg) = config("[couplings]\ng_x = 1.0\ng_z = 0.0\n");
    assert_eq!(st, ScatterlabStatus::Validation);
    assert!(cfg.is_null());
    assert!(last_error().contains("length"), "{}", last_error());

    let bad = [0x66u8, 0xff, 0x00];
    let mut cfg = ptr::null_mut();
    let st = unsafe { scatterlab_config_from_toml(bad.as_ptr().cast(), &mut cfg) };
    assert_eq!(st, ScatterlabStatus::InvalidString);

    unsafe {
        scatterlab_config_free(ptr::null_mut());
        scatterlab_state_free(ptr::null_mut());
        scatterlab_dispersion_free(ptr::null_mut());
    }
}

#[test]
fn spectrum_measures() {
    let flat = [0.25f64; 4];
    let mut s = 0.0;
    assert_eq!(unsafe { scatterlab_entanglement_entropy(flat.as_ptr(), 4, &mut s) }, ScatterlabStatus::Ok);
    assert!((s - 4f64.ln()).abs() < 1e-12);
    let mut f = 1.0;
    assert_eq!(unsafe { scatterlab_antiflatness(flat.as_ptr(), 4, 4, &mut f) }, ScatterlabStatus::Ok);
    assert!(f.abs() < 1e-15);
    assert_eq!(unsafe { scatterlab_antiflatness(flat.as_ptr(), 4, 2, &mut f) }, ScatterlabStatus::Validation);
    assert!(!last_error().is_empty());
}

#[test]
fn vacuum_scatter_and_round_trip_through_a_file() {
    let (st, cfg) = config(TINY);
    assert_eq!(st, ScatterlabStatus::Ok, "{}", last_error());
    let mut l = 0;
    unsafe {
        assert_eq!(scatterlab_config_length(cfg, &mut l), ScatterlabStatus::Ok);
        assert_eq!(l, 12);
        assert_eq!(scatterlab_config_set_momentum(cfg, f64::NAN), ScatterlabStatus::Validation);

        let mut vac = ptr::null_mut();
        let mut e0 = 0.0;
        assert_eq!(scatterlab_vacuum(cfg, &mut vac, &mut e0), ScatterlabStatus::Ok, "{}", last_error());
        assert!(e0 < 0.0);

        let mut fin = ptr::null_mut();
        assert_eq!(scatterlab_scatter(cfg, vac, &mut fin), ScatterlabStatus::Ok, "{}", last_error());
        let mut ns = 0.0;
        assert_eq!(scatterlab_state_norm_sq(fin, &mut ns), ScatterlabStatus::Ok);
        assert!((ns - 1.0).abs() < 1e-3);

        let mut needed = 0;
        assert_eq!(
            scatterlab_state_schmidt_values(fin, 5, ptr::null_mut(), 0, &mut needed),
            ScatterlabStatus::BufferTooSmall
        );
        let mut buf = vec![0.0; needed];
        let mut written = 0;
        assert_eq!(
            scatterlab_state_schmidt_values(fin, 5, buf.as_mut_ptr(), buf.len(), &mut written),
            ScatterlabStatus::Ok
        );
        assert_eq!(written, needed);
        assert!((buf.iter().sum::<f64>() - ns).abs() < 1e-9);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("s.mps").to_str().unwrap()).unwrap();
        assert_eq!(scatterlab_state_save(fin, path.as_ptr()), ScatterlabStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(scatterlab_state_load(path.as_ptr(), &mut back), ScatterlabStatus::Ok);
        let mut len = 0;
        scatterlab_state_length(back, &mut len);
        assert_eq!(len, 12);
        let missing = CString::new(dir.path().join("nope.mps").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(scatterlab_state_load(missing.as_ptr(), &mut none), ScatterlabStatus::Io);

        scatterlab_state_free(back);
        scatterlab_state_free(fin);
        scatterlab_state_free(vac);
        scatterlab_config_free(cfg);
    }
}

#[test]
fn free_fermion_dispersion() {
    let (_, cfg) = config(TINY);
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(scatterlab_dispersion(cfg, &mut table), ScatterlabStatus::Ok, "{}", last_error());
        let mut m = 0.0;
        assert_eq!(scatterlab_dispersion_mass(table, 1, &mut m), ScatterlabStatus::Ok);
        assert!((m - 0.5).abs() < 1e-6, "{m}");
        let k = 0.3;
        let mut e = 0.0;
        scatterlab_dispersion_energy(table, 1, k, &mut e);
        let exact = 2.0 * (1.0 + 1.25f64.powi(2) - 2.5 * k.cos()).sqrt();
        assert!((e - exact).abs() < 1e-6);
        let mut v = 0.0;
        assert_eq!(scatterlab_dispersion_velocity(table, 1, k, &mut v), ScatterlabStatus::Ok);
        assert!((v - 2.0 * 1.25 * k.sin() / exact * 2.0).abs() < 1e-5, "{v}");
        assert_eq!(scatterlab_dispersion_mass(table, 3, &mut m), ScatterlabStatus::Validation);
        let mut kt = 0.0;
        assert_ne!(scatterlab_dispersion_threshold(table, &mut kt), ScatterlabStatus::Ok);
        scatterlab_dispersion_free(table);
        scatterlab_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/scatterlab.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .stdin(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut child| {
            use std::io::Write;
            child.stdin.take().unwrap().write_all(b"#include \"scatterlab.h\"\nint main(void) { return 0; }\n")?;
            child.wait()
        })
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
