//! C interface to `netwave`.
//!
//! Objects are exposed as opaque handles created by `*_new`/`*_from_json`
//! functions and released by the matching `*_free`. Every fallible function
//! returns an [`NwStatus`]; on failure a description is available from
//! [`nw_last_error`] until the next call on the same thread.

use netwave::io::NetworkConfig;
use netwave::rational::parse_q;
use netwave::signal::Piecewise;
use netwave::spectral::{stability_verdict_delays, Verdict};
use netwave::wavenet::{build_m, random_state, simulate_wave, stability_verdict_wave, Network, WaveRun};
use netwave::Error;
use rand::SeedableRng;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Dimension = 3,
    CapExceeded = 4,
    NotInConstraintSpace = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Verdicts reported by the stability functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwVerdict {
    Stable = 0,
    Unstable = 1,
    Inconclusive = 2,
}

/// A validated wave network with its optional damping description.
pub struct NwNetwork {
    network: Network,
    config: NetworkConfig,
}

/// A finished wave simulation.
pub struct NwWaveRun {
    run: WaveRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NwStatus {
    match e {
        Error::Dimension(_) => NwStatus::Dimension,
        Error::SearchCap { .. } | Error::DepthCap { .. } => NwStatus::CapExceeded,
        Error::NotInConstraintSpace { .. } => NwStatus::NotInConstraintSpace,
        _ => NwStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), NwStatus>) -> NwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            NwStatus::Internal
        }
    }
}

fn fail(e: Error) -> NwStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> NwStatus {
    set_error(format!("{what} is null"));
    NwStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, NwStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        NwStatus::InvalidInput
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, NwStatus> {
    serde_json::from_str(text).map_err(|e| fail(Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))))
}

/// Message describing the last failure on this thread, or null.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn nw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a network description (the same JSON as the command-line tool).
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nw_network_from_json(json: *const c_char, out: *mut *mut NwNetwork) -> NwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config: NetworkConfig = parse_json(read_str(json, "json")?)?;
        let network = config.network().map_err(fail)?;
        *out = Box::into_raw(Box::new(NwNetwork { network, config }));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`nw_network_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nw_network_free(net: *mut NwNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nw_network_edge_count(net: *const NwNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.network.edge_count())
}

/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nw_network_damped_count(net: *const NwNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.network.damped().len())
}

/// Writes the `2N × 2N` boundary coupling matrix, row-major, for the given
/// damping values (one per damped vertex).
///
/// # Safety
/// `eta` must hold `n_eta` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nw_network_transmission(
    net: *const NwNetwork,
    eta: *const f64,
    n_eta: usize,
    out: *mut f64,
    out_len: usize,
) -> NwStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if eta.is_null() && n_eta > 0 {
            return Err(null("eta"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let eta = if n_eta == 0 { &[][..] } else { std::slice::from_raw_parts(eta, n_eta) };
        let m = build_m(&net.network, eta).map_err(fail)?;
        let n = m.dim();
        if out_len < n * n {
            set_error(format!("output needs {} entries", n * n));
            return Err(NwStatus::BufferTooSmall);
        }
        let out = std::slice::from_raw_parts_mut(out, n * n);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = m.get(r, c).re;
            }
        }
        Ok(())
    })
}

/// Topological stability verdict over the network's `damping_set`.
///
/// # Safety
/// `net` must be a live handle and `verdict` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nw_network_verdict(net: *const NwNetwork, verdict: *mut NwVerdict) -> NwStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let set = net
            .config
            .damping_set
            .as_ref()
            .ok_or_else(|| fail(Error::InvalidInput("network has no damping_set".into())))?;
        let v = stability_verdict_wave(&net.network, set).map_err(fail)?;
        *verdict = if v.stable { NwVerdict::Stable } else { NwVerdict::Unstable };
        Ok(())
    })
}

/// Simulates from a seeded random admissible state with the network's
/// damping signal (zero damping when absent).
///
/// # Safety
/// `net` must be a live handle, `grid_step` a nul-terminated rational such
/// as `"1/16"`, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nw_wave_simulate(
    net: *const NwNetwork,
    grid_step: *const c_char,
    steps: usize,
    seed: u64,
    out: *mut *mut NwWaveRun,
) -> NwStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let step = parse_q(read_str(grid_step, "grid_step")?).map_err(fail)?;
        let damping = net
            .config
            .damping()
            .map_err(fail)?
            .unwrap_or_else(|| Piecewise::constant(vec![netwave::rational::qi(0); net.network.damped().len()]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&net.network, &step, &mut rng).map_err(fail)?;
        let run = simulate_wave(&state, &net.network, &damping, steps).map_err(fail)?;
        *out = Box::into_raw(Box::new(NwWaveRun { run }));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nw_wave_run_len(run: *const NwWaveRun) -> usize {
    run.as_ref().map_or(0, |r| r.run.energies().len())
}

/// Copies the energy at every grid time into `out`.
///
/// # Safety
/// `run` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nw_wave_run_energies(run: *const NwWaveRun, out: *mut f64, out_len: usize) -> NwStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = run.run.energies();
        if out_len < e.len() {
            set_error(format!("output needs {} entries", e.len()));
            return Err(NwStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(out, e.len()).copy_from_slice(e);
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`nw_wave_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nw_wave_run_free(run: *mut NwWaveRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Stability of a delay equation under switching within a matrix family,
/// given as the JSON used by `netwave stability delays`.
///
/// # Safety
/// `json` and `x_max` must be nul-terminated; `verdict` and `mu_hat` valid.
#[no_mangle]
pub unsafe extern "C" fn nw_delay_verdict(
    json: *const c_char,
    x_max: *const c_char,
    cap: u64,
    relative_tol: f64,
    verdict: *mut NwVerdict,
    mu_hat: *mut f64,
) -> NwStatus {
    guard(|| {
        if verdict.is_null() || mu_hat.is_null() {
            return Err(null("output pointer"));
        }
        let config: netwave::io::FamilyConfig = parse_json(read_str(json, "json")?)?;
        let x_max = parse_q(read_str(x_max, "x_max")?).map_err(fail)?;
        let (delays, family) = config.build().map_err(fail)?;
        let v = stability_verdict_delays(&delays, &family, &x_max, cap, relative_tol).map_err(fail)?;
        *verdict = match v.verdict {
            Verdict::Stable => NwVerdict::Stable,
            Verdict::Unstable => NwVerdict::Unstable,
            Verdict::Inconclusive => NwVerdict::Inconclusive,
        };
        *mu_hat = v.mu_hat;
        Ok(())
    })
}
