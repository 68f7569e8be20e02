//! C interface to `multiprop`.
//!
//! Experiments and chains are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`MpStatus`]; on failure
//! the message is available from [`mp_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use multiprop::diagnostics::{ess, move_rate};
use multiprop::runner::{build_sampler, build_target, parse_config, ExperimentConfig};
use multiprop::{barker_weights, drive, ChainRecord, Error, Executor, RunOptions};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The configuration or arguments were rejected.
    Config = 3,
    /// Sampling or a diagnostic failed at run time.
    Runtime = 4,
    /// An output buffer is shorter than required.
    BufferTooSmall = 5,
    Panic = 6,
}

/// A parsed and validated experiment configuration.
pub struct MpExperiment {
    config: ExperimentConfig,
}

/// The recorded states of one chain.
pub struct MpChain {
    record: ChainRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MpStatus, msg: impl Into<String>) -> MpStatus {
    set_last_error(msg.into());
    status
}

fn from_error(e: Error) -> MpStatus {
    let status = if e.is_config_error() {
        MpStatus::Config
    } else {
        MpStatus::Runtime
    };
    fail(status, e.to_string())
}

fn guarded(f: impl FnOnce() -> MpStatus) -> MpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(MpStatus::Panic, "internal panic"),
    }
}

/// Message of the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a TOML experiment description.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_experiment_from_toml(
    toml: *const c_char,
    out: *mut *mut MpExperiment,
) -> MpStatus {
    guarded(|| {
        if toml.is_null() || out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(MpStatus::InvalidUtf8, e.to_string()),
        };
        match parse_config(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(MpExperiment { config }));
                MpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases an experiment. NULL is ignored.
///
/// # Safety
/// `exp` must come from [`mp_experiment_from_toml`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mp_experiment_free(exp: *mut MpExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs chain number `chain` of the experiment with `workers` threads
/// (0 = all cores). The experiment's `n_chains` is not consulted.
///
/// # Safety
/// `exp` must be a live experiment and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_experiment_run_chain(
    exp: *const MpExperiment,
    chain: u64,
    workers: usize,
    out: *mut *mut MpChain,
) -> MpStatus {
    guarded(|| {
        if exp.is_null() || out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let cfg = &(*exp).config;
        let run = || -> multiprop::Result<ChainRecord> {
            let exec = Executor::new(workers)?;
            let target = build_target(&cfg.target)?;
            let sampler = build_sampler(&cfg.sampler, &target)?;
            let init = cfg
                .run
                .init
                .clone()
                .unwrap_or_else(|| target.default_init());
            let opts = RunOptions {
                chain,
                record_log_masses: false,
            };
            let run = drive(
                sampler.as_ref(),
                &init,
                cfg.run.n_iters,
                cfg.sampler.n_jumps(),
                cfg.run.seed,
                &exec,
                opts,
            )?;
            Ok(run.record)
        };
        match run() {
            Ok(record) => {
                *out = Box::into_raw(Box::new(MpChain { record }));
                MpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of stored states, including the initial one. 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mp_chain_len(chain: *const MpChain) -> usize {
    chain.as_ref().map_or(0, |c| c.record.samples.len())
}

/// State dimension. 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mp_chain_dim(chain: *const MpChain) -> usize {
    chain.as_ref().map_or(0, |c| c.record.dim())
}

/// Copies all states row by row into `out`, which must hold at least
/// `len * dim` doubles.
///
/// # Safety
/// `chain` must be a live chain and `out` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn mp_chain_copy_samples(
    chain: *const MpChain,
    out: *mut f64,
    capacity: usize,
) -> MpStatus {
    guarded(|| {
        let Some(c) = chain.as_ref() else {
            return fail(MpStatus::NullPointer, "null chain");
        };
        if out.is_null() {
            return fail(MpStatus::NullPointer, "null output buffer");
        }
        let needed = c.record.samples.len() * c.record.dim();
        if capacity < needed {
            return fail(
                MpStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, {needed} needed"),
            );
        }
        let dst = std::slice::from_raw_parts_mut(out, needed);
        for (row, s) in dst
            .chunks_exact_mut(c.record.dim().max(1))
            .zip(&c.record.samples)
        {
            row.copy_from_slice(s);
        }
        MpStatus::Ok
    })
}

/// Fraction of iterations that moved.
///
/// # Safety
/// `chain` must be a live chain and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_chain_move_rate(chain: *const MpChain, out: *mut f64) -> MpStatus {
    guarded(|| {
        let Some(c) = chain.as_ref() else {
            return fail(MpStatus::NullPointer, "null chain");
        };
        if out.is_null() {
            return fail(MpStatus::NullPointer, "null output");
        }
        match move_rate(&c.record) {
            Ok(r) => {
                *out = r;
                MpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a chain. NULL is ignored.
///
/// # Safety
/// `chain` must come from [`mp_experiment_run_chain`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mp_chain_free(chain: *mut MpChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Normalized Barker selection probabilities from `n` log-masses.
///
/// # Safety
/// `log_masses` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mp_barker_weights(
    log_masses: *const f64,
    n: usize,
    out: *mut f64,
) -> MpStatus {
    guarded(|| {
        if log_masses.is_null() || out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let lm = std::slice::from_raw_parts(log_masses, n);
        match barker_weights(lm) {
            Ok(w) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(w.probs());
                MpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Effective sample size of a scalar series of length `n`.
///
/// # Safety
/// `series` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_ess(series: *const f64, n: usize, out: *mut f64) -> MpStatus {
    guarded(|| {
        if series.is_null() || out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        match ess(std::slice::from_raw_parts(series, n)) {
            Ok(v) => {
                *out = v;
                MpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
