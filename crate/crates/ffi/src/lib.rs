//! C ABI for the `etcdnes` simulation library.
//!
//! Every fallible function returns an [`EtcdnesStatus`]; on failure the
//! message is available from [`etcdnes_last_error`] on the same thread.
//! Simulations are opaque handles created by [`etcdnes_simulation_new`] and
//! released with [`etcdnes_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use etcdnes::compressors::Compressor;
use etcdnes::dynamics::Simulation;
use etcdnes::harness::experiment::setup_for;
use etcdnes::harness::{emit_outputs, run_experiment, ExperimentConfig};
use etcdnes::linalg::Mat;
use etcdnes::metrics::residual;
use etcdnes::theory::spectral_radius_2x2;
use etcdnes::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtcdnesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed config text, unreadable file or failed write.
    Config = 3,
    /// Graph not strongly connected or otherwise unusable.
    InvalidGraph = 4,
    /// Parameter outside its admissible range, or a degenerate game.
    InvalidParameter = 5,
    Diverged = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtcdnesCompressorKind {
    Identity = 0,
    /// `param` is the number of quantization bits.
    Quantize = 1,
    /// `param` is the number of kept coordinates.
    TopK = 2,
    NormSign = 3,
}

/// Opaque simulation handle.
pub struct EtcdnesSimulation {
    sim: Simulation,
    x_star: Mat,
    bits: u64,
    rounds: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> EtcdnesStatus {
    match err {
        Error::Run { source, .. } => status_of(source),
        Error::Config(_) | Error::Io { .. } | Error::Parse { .. } => EtcdnesStatus::Config,
        Error::NotStronglyConnected | Error::InvalidGraph(_) | Error::DegenerateSpectrum { .. } => {
            EtcdnesStatus::InvalidGraph
        }
        Error::Diverged { .. } => EtcdnesStatus::Diverged,
        _ => EtcdnesStatus::InvalidParameter,
    }
}

fn fail(status: EtcdnesStatus, msg: &str) -> EtcdnesStatus {
    set_last_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), EtcdnesStatus>) -> EtcdnesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EtcdnesStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(EtcdnesStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: etcdnes::Result<T>) -> Result<T, EtcdnesStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, EtcdnesStatus> {
    if ptr.is_null() {
        return Err(fail(EtcdnesStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(EtcdnesStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a>(ptr: *mut EtcdnesSimulation) -> Result<&'a mut EtcdnesSimulation, EtcdnesStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(EtcdnesStatus::NullPointer, "null simulation handle"))
}

unsafe fn out<'a, T>(ptr: *mut T) -> Result<&'a mut T, EtcdnesStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(EtcdnesStatus::NullPointer, "null output pointer"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn etcdnes_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn etcdnes_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a simulation of the first algorithm in `config_text` (the
/// key-value config format) started from `seed`.
///
/// # Safety
/// `config_text` must be a NUL-terminated string; `out_sim` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_new(
    config_text: *const c_char,
    seed: u64,
    out_sim: *mut *mut EtcdnesSimulation,
) -> EtcdnesStatus {
    guard(|| {
        let slot = out(out_sim)?;
        *slot = std::ptr::null_mut();
        let cfg = lift(ExperimentConfig::from_text(text(config_text)?))?;
        let instance = lift(cfg.instance())?;
        let spec = lift(instance.resolve(&cfg.algorithms[0]))?;
        let setup = setup_for(&instance, &spec, cfg.iters, seed, cfg.scalar_bits);
        let x_star = Mat::consensual(instance.graph.agents(), &instance.x_star);
        let sim = lift(Simulation::new(setup))?;
        *slot = Box::into_raw(Box::new(EtcdnesSimulation {
            sim,
            x_star,
            bits: 0,
            rounds: 0,
        }));
        Ok(())
    })
}

/// Advances the simulation by `steps` iterations. On divergence the handle
/// keeps the last finite state.
///
/// # Safety
/// `sim` must come from [`etcdnes_simulation_new`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_step(sim: *mut EtcdnesSimulation, steps: u64) -> EtcdnesStatus {
    guard(|| {
        let h = handle(sim)?;
        for _ in 0..steps {
            let ev = lift(h.sim.step())?;
            h.bits += ev.bits;
            h.rounds += ev.rounds();
        }
        Ok(())
    })
}

/// Iterations taken so far.
///
/// # Safety
/// `sim` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_iteration(sim: *const EtcdnesSimulation) -> u64 {
    sim.as_ref().map_or(0, |h| h.sim.iteration() as u64)
}

/// Normalized residual `‖X_k − X*‖ / ‖X_0 − X*‖` of the current state.
///
/// # Safety
/// `sim` must be a live handle; `out_residual` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_residual(
    sim: *mut EtcdnesSimulation,
    out_residual: *mut f64,
) -> EtcdnesStatus {
    guard(|| {
        let h = handle(sim)?;
        let slot = out(out_residual)?;
        *slot = lift(residual(&h.sim.state().x, &h.x_star, &h.sim.setup().x0))?;
        Ok(())
    })
}

/// Cumulative bits sent and agent transmissions so far.
///
/// # Safety
/// `sim` must be a live handle; both outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_bits(
    sim: *mut EtcdnesSimulation,
    out_bits: *mut u64,
    out_rounds: *mut u64,
) -> EtcdnesStatus {
    guard(|| {
        let h = handle(sim)?;
        *out(out_bits)? = h.bits;
        *out(out_rounds)? = h.rounds;
        Ok(())
    })
}

/// Copies the estimate matrix row-major (agent by profile coordinate) into
/// `buf`. `out_rows` and `out_cols` receive the shape even when `buf` is too
/// small.
///
/// # Safety
/// `sim` must be a live handle, `buf` valid for `len` writes (or null with
/// `len` 0), and the shape outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_estimate(
    sim: *mut EtcdnesSimulation,
    buf: *mut f64,
    len: usize,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> EtcdnesStatus {
    guard(|| {
        let h = handle(sim)?;
        let x = &h.sim.state().x;
        *out(out_rows)? = x.rows();
        *out(out_cols)? = x.cols();
        let data = x.as_slice();
        if len < data.len() {
            return Err(fail(
                EtcdnesStatus::BufferTooSmall,
                &format!("estimate needs {} doubles, buffer holds {len}", data.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(EtcdnesStatus::NullPointer, "null estimate buffer"));
        }
        std::slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(data);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must come from [`etcdnes_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_simulation_free(sim: *mut EtcdnesSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs every configured algorithm and seed and writes the CSV traces and
/// `summary.txt` into `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_run_experiment(config_text: *const c_char, out_dir: *const c_char) -> EtcdnesStatus {
    guard(|| {
        let cfg = lift(ExperimentConfig::from_text(text(config_text)?))?;
        let dir = text(out_dir)?;
        let result = lift(run_experiment(&cfg))?;
        lift(emit_outputs(&result, Path::new(dir)))?;
        Ok(())
    })
}

/// Bits of one transmission of a `d`-vector with `scalar_bits`-bit scalars.
///
/// # Safety
/// `out_bits` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_compressor_bits(
    kind: EtcdnesCompressorKind,
    param: u32,
    d: usize,
    scalar_bits: u32,
    out_bits: *mut u64,
) -> EtcdnesStatus {
    guard(|| {
        let c = match kind {
            EtcdnesCompressorKind::Identity => Compressor::Identity,
            EtcdnesCompressorKind::Quantize => Compressor::Quantize { bits: param },
            EtcdnesCompressorKind::TopK => Compressor::TopK { k: param as usize },
            EtcdnesCompressorKind::NormSign => Compressor::NormSign,
        };
        lift(c.validate(d))?;
        *out(out_bits)? = c.bits(d, scalar_bits);
        Ok(())
    })
}

/// Spectral radius of the row-major 2×2 matrix `m[0..4]`; NaN for null.
///
/// # Safety
/// `m` must point to four readable doubles.
#[no_mangle]
pub unsafe extern "C" fn etcdnes_spectral_radius_2x2(m: *const f64) -> f64 {
    if m.is_null() {
        return f64::NAN;
    }
    let v = std::slice::from_raw_parts(m, 4);
    spectral_radius_2x2(&[[v[0], v[1]], [v[2], v[3]]])
}
