//! C ABI for the sampler.
//!
//! Every handle is opaque and owned by the caller once returned; free it
//! with the matching `*_free` function. Functions return an [`AimhStatus`];
//! on failure [`aimh_last_error`] describes the most recent error on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use aimh::chain::{Chain, DEFAULT_INIT_ATTEMPTS};
use aimh::harness::{
    build_initial, build_schedule, build_target, convergence_table, emit_outputs, parse_config, preset, run_ensemble,
    ConvergenceTable, EnsembleResult, ExperimentConfig,
};
use aimh::numeric::child_seed;
use aimh::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AimhStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration was rejected.
    Config = 3,
    /// Sampling or I/O failed.
    Runtime = 4,
    /// A caller buffer was too small or an index out of range.
    OutOfRange = 5,
    /// An internal panic was caught.
    Panic = 6,
}

/// Parsed experiment configuration.
pub struct AimhConfig {
    inner: ExperimentConfig,
}

/// One chain of an experiment, stepped by the caller.
pub struct AimhChain {
    inner: Chain,
}

/// Results of a finished ensemble run.
pub struct AimhEnsemble {
    config: ExperimentConfig,
    result: EnsembleResult,
    convergence: Option<ConvergenceTable>,
}

/// Outcome of one chain iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AimhStep {
    pub iteration: u64,
    pub alpha: f64,
    pub accepted: bool,
    pub independent: bool,
    pub regenerated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn fail(status: AimhStatus, msg: impl Into<String>) -> AimhStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> AimhStatus {
    let status = if e.is_config() { AimhStatus::Config } else { AimhStatus::Runtime };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into [`AimhStatus::Panic`].
fn guard(f: impl FnOnce() -> AimhStatus) -> AimhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            fail(AimhStatus::Panic, format!("internal panic: {}", msg.unwrap_or_default()))
        }
    }
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, AimhStatus> {
    if s.is_null() {
        return Err(fail(AimhStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(AimhStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aimh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aimh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_config_parse(text: *const c_char, out: *mut *mut AimhConfig) -> AimhStatus {
    guard(|| {
        if out.is_null() {
            return fail(AimhStatus::NullArgument, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(AimhConfig { inner: c }));
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a named preset.
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_config_preset(name: *const c_char, out: *mut *mut AimhConfig) -> AimhStatus {
    guard(|| {
        if out.is_null() {
            return fail(AimhStatus::NullArgument, "null output pointer");
        }
        let name = match read_str(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match preset(name) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(AimhConfig { inner: c }));
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Overrides the master seed and ensemble size.
///
/// # Safety
/// `config` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn aimh_config_set_size(config: *mut AimhConfig, seed: u64, n_chains: usize, n_iterations: u64) -> AimhStatus {
    guard(|| {
        let Some(c) = config.as_mut() else { return fail(AimhStatus::NullArgument, "null config") };
        if n_chains == 0 {
            return fail(AimhStatus::Config, "n_chains: must be at least 1");
        }
        if seed > i64::MAX as u64 {
            return fail(AimhStatus::Config, "seed: must fit in a signed 64-bit integer");
        }
        c.inner.seed = seed;
        c.inner.n_chains = n_chains;
        c.inner.n_iterations = n_iterations;
        AimhStatus::Ok
    })
}

/// Dimension of the configured target.
///
/// # Safety
/// `config` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_config_dim(config: *const AimhConfig, out: *mut usize) -> AimhStatus {
    guard(|| {
        let (Some(c), false) = (config.as_ref(), out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        match build_target(&c.inner.target, false) {
            Ok(t) => {
                *out = t.dim();
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `config` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aimh_config_free(config: *mut AimhConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Builds chain `index` of the experiment, seeded exactly as in an
/// ensemble run, and draws its initial state.
///
/// # Safety
/// `config` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_chain_new(config: *const AimhConfig, index: usize, out: *mut *mut AimhChain) -> AimhStatus {
    guard(|| {
        let (Some(c), false) = (config.as_ref(), out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        let c = &c.inner;
        let built = (|| {
            let target = build_target(&c.target, true)?;
            let schedule = build_schedule(c, target.as_ref())?;
            let initial = build_initial(&c.initial, &target)?;
            Chain::new(target, schedule, initial.as_ref(), child_seed(c.seed, index as u64), DEFAULT_INIT_ATTEMPTS)
        })();
        match built {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(AimhChain { inner: chain }));
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs one iteration; `info` may be null.
///
/// # Safety
/// `chain` is a live handle; `info` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_chain_step(chain: *mut AimhChain, info: *mut AimhStep) -> AimhStatus {
    guard(|| {
        let Some(ch) = chain.as_mut() else { return fail(AimhStatus::NullArgument, "null chain") };
        match ch.inner.step() {
            Ok(r) => {
                if let Some(i) = info.as_mut() {
                    *i = AimhStep {
                        iteration: r.iteration,
                        alpha: r.alpha,
                        accepted: r.accepted,
                        independent: r.kernel_was_independent,
                        regenerated: r.regeneration_detected,
                    };
                }
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copies the current state into `buf`, which holds `len` values.
///
/// # Safety
/// `chain` is a live handle; `buf` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aimh_chain_state(chain: *const AimhChain, buf: *mut f64, len: usize) -> AimhStatus {
    guard(|| {
        let (Some(ch), false) = (chain.as_ref(), buf.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        let x = &ch.inner.state().current;
        if len < x.len() {
            return fail(AimhStatus::OutOfRange, format!("state buffer holds {len} values, need {}", x.len()));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        AimhStatus::Ok
    })
}

/// Number of states in the chain's history.
///
/// # Safety
/// `chain` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aimh_chain_history_len(chain: *const AimhChain) -> usize {
    chain.as_ref().map_or(0, |c| c.inner.history().len())
}

/// # Safety
/// `chain` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aimh_chain_free(chain: *mut AimhChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Runs the whole ensemble on `threads` workers (0 = one per core).
/// Failed chains are recorded in the result, not reported here.
///
/// # Safety
/// `config` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_run(config: *const AimhConfig, threads: usize, out: *mut *mut AimhEnsemble) -> AimhStatus {
    guard(|| {
        let (Some(c), false) = (config.as_ref(), out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        let config = c.inner.clone();
        let run = run_ensemble(&config, threads).and_then(|result| {
            let convergence = convergence_table(&config, &result)?;
            Ok(AimhEnsemble { config, result, convergence })
        });
        match run {
            Ok(e) => {
                *out = Box::into_raw(Box::new(e));
                AimhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of chains that stopped with an error.
///
/// # Safety
/// `ensemble` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_failed(ensemble: *const AimhEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.result.failed())
}

/// Acceptance rate of chain `index`.
///
/// # Safety
/// `ensemble` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_acceptance(ensemble: *const AimhEnsemble, index: usize, out: *mut f64) -> AimhStatus {
    guard(|| {
        let (Some(e), false) = (ensemble.as_ref(), out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        match e.result.chains.get(index) {
            Some(c) => {
                *out = c.acceptance_rate();
                AimhStatus::Ok
            }
            None => fail(AimhStatus::OutOfRange, format!("chain {index} of {}", e.result.chains.len())),
        }
    })
}

/// Copies the convergence series. With null buffers only `*len_out` is
/// set to the number of snapshots; otherwise `iterations` and `tv` must
/// hold `len` values each.
///
/// # Safety
/// `ensemble` is a live handle; buffers are null or hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_convergence(
    ensemble: *const AimhEnsemble,
    iterations: *mut u64,
    tv: *mut f64,
    len: usize,
    len_out: *mut usize,
) -> AimhStatus {
    guard(|| {
        let (Some(e), false) = (ensemble.as_ref(), len_out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        let Some(t) = &e.convergence else { return fail(AimhStatus::Config, "no partition configured") };
        *len_out = t.iterations.len();
        if iterations.is_null() && tv.is_null() {
            return AimhStatus::Ok;
        }
        if iterations.is_null() || tv.is_null() {
            return fail(AimhStatus::NullArgument, "both buffers are required");
        }
        if len < t.iterations.len() {
            return fail(AimhStatus::OutOfRange, format!("buffers hold {len} values, need {}", t.iterations.len()));
        }
        ptr::copy_nonoverlapping(t.iterations.as_ptr(), iterations, t.iterations.len());
        ptr::copy_nonoverlapping(t.tv.as_ptr(), tv, t.tv.len());
        AimhStatus::Ok
    })
}

/// Noise floor of the convergence measure.
///
/// # Safety
/// `ensemble` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_noise_floor(ensemble: *const AimhEnsemble, out: *mut f64) -> AimhStatus {
    guard(|| {
        let (Some(e), false) = (ensemble.as_ref(), out.is_null()) else { return fail(AimhStatus::NullArgument, "null argument") };
        match &e.convergence {
            Some(t) => {
                *out = t.noise_floor;
                AimhStatus::Ok
            }
            None => fail(AimhStatus::Config, "no partition configured"),
        }
    })
}

/// Writes the CSV files and manifest into `dir`.
///
/// # Safety
/// `ensemble` is a live handle; `dir` is a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_write(ensemble: *const AimhEnsemble, dir: *const c_char) -> AimhStatus {
    guard(|| {
        let Some(e) = ensemble.as_ref() else { return fail(AimhStatus::NullArgument, "null ensemble") };
        let dir = match read_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match emit_outputs(&e.config, &e.result, Path::new(dir)) {
            Ok(_) => AimhStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `ensemble` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aimh_ensemble_free(ensemble: *mut AimhEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}
