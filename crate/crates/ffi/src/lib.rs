//! C ABI over `scatterlab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Every fallible
//! call returns a [`ScatterlabStatus`]; on failure the message is available
//! from [`scatterlab_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use scatterlab::config::RunConfig;
use scatterlab::entanglement::{antiflatness, entanglement_entropy};
use scatterlab::mps::io;
use scatterlab::pipeline;
use scatterlab::spectroscopy::{group_velocity, DispersionTable, Species};
use scatterlab::{Error, ErrorClass, MatrixProductState, SchmidtSpectrum};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Validation = 3,
    Numerical = 4,
    Physics = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Run configuration.
pub struct ScatterlabConfig(RunConfig);

/// Matrix-product state.
pub struct ScatterlabState(MatrixProductState);

/// Dispersion relations of both particle species.
pub struct ScatterlabDispersion(DispersionTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Status(ScatterlabStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> ScatterlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ScatterlabStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            match e.class() {
                ErrorClass::Validation => ScatterlabStatus::Validation,
                ErrorClass::Numerical => ScatterlabStatus::Numerical,
                ErrorClass::Physics => ScatterlabStatus::Physics,
                ErrorClass::Io => ScatterlabStatus::Io,
            }
        }
        Err(_) => {
            set_error("internal panic");
            ScatterlabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(ScatterlabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(ScatterlabStatus::InvalidString, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn species(s: u8) -> Result<Species, Failure> {
    Species::try_from(s).map_err(|m| Failure::Lib(Error::InvalidArgument(m)))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn scatterlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scatterlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_config_from_toml(
    text: *const c_char,
    out: *mut *mut ScatterlabConfig,
) -> ScatterlabStatus {
    guard(|| {
        let cfg = RunConfig::from_toml(string(text, "text")?)?;
        write_out(out, Box::into_raw(Box::new(ScatterlabConfig(cfg))), "out")
    })
}

/// Reads and validates a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_config_load(
    path: *const c_char,
    out: *mut *mut ScatterlabConfig,
) -> ScatterlabStatus {
    guard(|| {
        let cfg = RunConfig::load(Path::new(string(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(ScatterlabConfig(cfg))), "out")
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_config_free(cfg: *mut ScatterlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of lattice sites.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_config_length(cfg: *const ScatterlabConfig, out: *mut usize) -> ScatterlabStatus {
    guard(|| write_out(out, handle(cfg, "cfg")?.0.couplings.length, "out"))
}

/// Sets the incoming momentum, in units of π, of the left packet.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_config_set_momentum(cfg: *mut ScatterlabConfig, k_over_pi: f64) -> ScatterlabStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let mut next = cfg.0.clone();
        next.packet.k_over_pi = k_over_pi;
        next.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

/// Ground state of the configured chain. `energy` may be null.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_vacuum(
    cfg: *const ScatterlabConfig,
    out: *mut *mut ScatterlabState,
    energy: *mut f64,
) -> ScatterlabStatus {
    guard(|| {
        let vac = pipeline::run_vacuum(&handle(cfg, "cfg")?.0)?;
        if !energy.is_null() {
            energy.write(vac.energy);
        }
        write_out(out, Box::into_raw(Box::new(ScatterlabState(vac.state))), "out")
    })
}

/// Prepares two packets on `vacuum` and evolves them to `evolution.t_end`.
///
/// # Safety
/// `cfg` and `vacuum` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_scatter(
    cfg: *const ScatterlabConfig,
    vacuum: *const ScatterlabState,
    out: *mut *mut ScatterlabState,
) -> ScatterlabStatus {
    guard(|| {
        let run = pipeline::run_scatter(&handle(cfg, "cfg")?.0, &handle(vacuum, "vacuum")?.0, |_, _| Ok(()))?;
        write_out(out, Box::into_raw(Box::new(ScatterlabState(run.outcome.state))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_load(path: *const c_char, out: *mut *mut ScatterlabState) -> ScatterlabStatus {
    guard(|| {
        let s = io::load(Path::new(string(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(ScatterlabState(s))), "out")
    })
}

/// # Safety
/// `state` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_save(state: *const ScatterlabState, path: *const c_char) -> ScatterlabStatus {
    guard(|| Ok(io::save(&handle(state, "state")?.0, Path::new(string(path, "path")?))?))
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_free(state: *mut ScatterlabState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_length(state: *const ScatterlabState, out: *mut usize) -> ScatterlabStatus {
    guard(|| write_out(out, handle(state, "state")?.0.len(), "out"))
}

/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_norm_sq(state: *const ScatterlabState, out: *mut f64) -> ScatterlabStatus {
    guard(|| write_out(out, handle(state, "state")?.0.norm_sq(), "out"))
}

/// Schmidt values across the bond right of `cut_site`, in descending order.
///
/// Writes the number of values to `written`. When `capacity` is too small
/// nothing is copied, `written` holds the required size and the call returns
/// `BufferTooSmall`.
///
/// # Safety
/// `state` must be a live handle, `values` valid for `capacity` doubles (or
/// null with zero capacity) and `written` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_state_schmidt_values(
    state: *const ScatterlabState,
    cut_site: usize,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> ScatterlabStatus {
    guard(|| {
        let spec = handle(state, "state")?.0.schmidt_spectrum(cut_site)?;
        write_out(written, spec.values.len(), "written")?;
        if spec.values.len() > capacity {
            return Err(Failure::Status(
                ScatterlabStatus::BufferTooSmall,
                format!("{} values do not fit in {capacity}", spec.values.len()),
            ));
        }
        if values.is_null() && !spec.values.is_empty() {
            return Err(null("values"));
        }
        ptr::copy_nonoverlapping(spec.values.as_ptr(), values, spec.values.len());
        Ok(())
    })
}

unsafe fn spectrum<'a>(values: *const f64, len: usize) -> Result<SchmidtSpectrum, Failure> {
    if values.is_null() && len > 0 {
        return Err(null("values"));
    }
    let v: &'a [f64] = if len == 0 { &[] } else { std::slice::from_raw_parts(values, len) };
    Ok(SchmidtSpectrum {
        cut_site: 0,
        values: v.to_vec(),
        chi: len,
    })
}

/// Von Neumann entropy (natural log) of a spectrum of Schmidt values λ.
///
/// # Safety
/// `values` must be valid for `len` doubles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_entanglement_entropy(values: *const f64, len: usize, out: *mut f64) -> ScatterlabStatus {
    guard(|| write_out(out, entanglement_entropy(&spectrum(values, len)?), "out"))
}

/// Antiflatness of a spectrum padded with zeros to `chi` values.
///
/// # Safety
/// `values` must be valid for `len` doubles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_antiflatness(
    values: *const f64,
    len: usize,
    chi: usize,
    out: *mut f64,
) -> ScatterlabStatus {
    guard(|| write_out(out, antiflatness(&spectrum(values, len)?, chi)?, "out"))
}

/// Dispersion relations from exact diagonalization.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion(
    cfg: *const ScatterlabConfig,
    out: *mut *mut ScatterlabDispersion,
) -> ScatterlabStatus {
    guard(|| {
        let t = pipeline::run_dispersion(&handle(cfg, "cfg")?.0)?;
        write_out(out, Box::into_raw(Box::new(ScatterlabDispersion(t))), "out")
    })
}

/// # Safety
/// `table` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion_free(table: *mut ScatterlabDispersion) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Energy of species 1 or 2 at momentum `k` (radians).
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion_energy(
    table: *const ScatterlabDispersion,
    species_id: u8,
    k: f64,
    out: *mut f64,
) -> ScatterlabStatus {
    guard(|| write_out(out, handle(table, "table")?.0.energy(species(species_id)?, k)?, "out"))
}

/// Group velocity of species 1 or 2 at momentum `k` (radians).
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion_velocity(
    table: *const ScatterlabDispersion,
    species_id: u8,
    k: f64,
    out: *mut f64,
) -> ScatterlabStatus {
    guard(|| write_out(out, group_velocity(&handle(table, "table")?.0, species(species_id)?, k)?, "out"))
}

/// Rest mass of species 1 or 2.
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion_mass(
    table: *const ScatterlabDispersion,
    species_id: u8,
    out: *mut f64,
) -> ScatterlabStatus {
    guard(|| write_out(out, handle(table, "table")?.0.mass(species(species_id)?)?, "out"))
}

/// Smallest incoming momentum (radians) at which two light particles can
/// produce a heavy one.
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scatterlab_dispersion_threshold(
    table: *const ScatterlabDispersion,
    out: *mut f64,
) -> ScatterlabStatus {
    guard(|| write_out(out, handle(table, "table")?.0.threshold_momentum()?, "out"))
}
