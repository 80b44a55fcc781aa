//! C ABI for the `cvbell` library.
//!
//! Every function returns a [`CvbStatus`]; on failure a human-readable message
//! is available from [`cvb_last_error`] on the same thread. Handles are
//! created by `*_new` and must be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvbell::conditioning::SignedGaussianMixture;
use cvbell::mc::{acquisition_time, run_protocol, ProtocolConfig};
use cvbell::{chsh, optimize_lambda, Angles, Error, ExperimentParams};
use nalgebra::Vector4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvbStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Singular = 3,
    InvalidRegime = 4,
    Truncation = 5,
    EnvelopeFailure = 6,
    Multimodal = 7,
    Config = 8,
    Io = 9,
    Validation = 10,
    Panic = 11,
}

impl From<&Error> for CvbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => CvbStatus::Domain,
            Error::Singular { .. } => CvbStatus::Singular,
            Error::InvalidRegime(_) => CvbStatus::InvalidRegime,
            Error::Truncation { .. } => CvbStatus::Truncation,
            Error::EnvelopeFailure { .. } => CvbStatus::EnvelopeFailure,
            Error::Multimodal { .. } => CvbStatus::Multimodal,
            Error::Config(_) => CvbStatus::Config,
            Error::Io(_) => CvbStatus::Io,
            Error::Validation(_) => CvbStatus::Validation,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CvbStatus, String)>) -> CvbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CvbStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CvbStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (CvbStatus, String) {
    (CvbStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CvbStatus, String)> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

/// Output slots are checked before any work is done.
unsafe fn slot<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, (CvbStatus, String)> {
    unsafe { out.as_mut() }.ok_or_else(|| null(what))
}

/// Message for the most recent failure on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Experiment parameters (opaque).
pub struct CvbParams {
    inner: ExperimentParams,
}

/// Heralded two-mode state (opaque).
pub struct CvbState {
    inner: SignedGaussianMixture,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvbBellResult {
    /// `E(theta1, phi1), E(theta1, phi2), E(theta2, phi1), E(theta2, phi2)`.
    pub correlators: [f64; 4],
    pub s: f64,
    pub success_prob: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvbMcResult {
    /// Nonzero when all four settings received events and `s_hat` is valid.
    pub has_s: i32,
    pub s_hat: f64,
    pub stderr_s: f64,
    /// Per setting, in the same order as `CvbBellResult::correlators`.
    pub events: [u64; 4],
    pub sign_sums: [i64; 4],
    pub pulses: u64,
    pub wall_sim_time: f64,
    pub p_hat: f64,
}

/// Creates parameters with the default CHSH settings.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn cvb_params_new(
    lambda: f64,
    transmittance: f64,
    eta: f64,
    eta_bhd: f64,
    out: *mut *mut CvbParams,
) -> CvbStatus {
    guard(|| {
        let out = unsafe { slot(out, "out") }?;
        let inner = ExperimentParams::new(lambda, transmittance, eta, eta_bhd).map_err(lib)?;
        *out = Box::into_raw(Box::new(CvbParams { inner }));
        Ok(())
    })
}

/// # Safety
/// `params` must come from [`cvb_params_new`].
#[no_mangle]
pub unsafe extern "C" fn cvb_params_set_angles(
    params: *mut CvbParams,
    theta1: f64,
    theta2: f64,
    phi1: f64,
    phi2: f64,
) -> CvbStatus {
    guard(|| {
        let p = unsafe { params.as_mut() }.ok_or_else(|| null("params"))?;
        p.inner = p.inner.with_angles(Angles {
            theta1,
            theta2,
            phi1,
            phi2,
        });
        Ok(())
    })
}

/// # Safety
/// `params` must come from [`cvb_params_new`] or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvb_params_free(params: *mut CvbParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_chsh(params: *const CvbParams, out: *mut CvbBellResult) -> CvbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        let out = unsafe { slot(out, "out") }?;
        let r = chsh(&p.inner).map_err(lib)?;
        let e = r.correlators;
        *out = CvbBellResult {
            correlators: [e[0][0], e[0][1], e[1][0], e[1][1]],
            s: r.s,
            success_prob: r.success_prob,
        };
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_success_probability(params: *const CvbParams, out: *mut f64) -> CvbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        let out = unsafe { slot(out, "out") }?;
        *out = cvbell::conditioning::success_probability(&p.inner.output_covariance().map_err(lib)?)
            .map_err(lib)?;
        Ok(())
    })
}

/// Squeezing that maximizes S with the default settings.
///
/// # Safety
/// `out_lambda` and `out_s_max` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_optimize_lambda(
    transmittance: f64,
    eta: f64,
    eta_bhd: f64,
    out_lambda: *mut f64,
    out_s_max: *mut f64,
) -> CvbStatus {
    guard(|| {
        let out_lambda = unsafe { slot(out_lambda, "out_lambda") }?;
        let out_s_max = unsafe { slot(out_s_max, "out_s_max") }?;
        let opt = optimize_lambda(transmittance, eta, eta_bhd, Angles::default()).map_err(lib)?;
        *out_lambda = opt.lambda;
        *out_s_max = opt.s_max;
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_state_new(params: *const CvbParams, out: *mut *mut CvbState) -> CvbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        let out = unsafe { slot(out, "out") }?;
        let inner = p.inner.conditional_state().map_err(lib)?;
        *out = Box::into_raw(Box::new(CvbState { inner }));
        Ok(())
    })
}

/// Wigner function at `r = (x_A, p_A, x_B, p_B)`.
///
/// # Safety
/// `state` must be a live handle, `r` must point to four doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_state_wigner(state: *const CvbState, r: *const f64, out: *mut f64) -> CvbStatus {
    guard(|| {
        let s = unsafe { deref(state, "state") }?;
        let out = unsafe { slot(out, "out") }?;
        if r.is_null() {
            return Err(null("r"));
        }
        let r = unsafe { std::slice::from_raw_parts(r, 4) };
        *out = s.inner.wigner(&Vector4::new(r[0], r[1], r[2], r[3]));
        Ok(())
    })
}

/// # Safety
/// `state` must come from [`cvb_state_new`] or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvb_state_free(state: *mut CvbState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Monte Carlo run of the event-ready protocol with equiprobable settings.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_run_protocol(
    params: *const CvbParams,
    n_target_events: u64,
    seed: u64,
    rep_rate: f64,
    out: *mut CvbMcResult,
) -> CvbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        let out = unsafe { slot(out, "out") }?;
        let mut config = ProtocolConfig::new(p.inner, n_target_events, seed);
        config.rep_rate = rep_rate;
        let r = run_protocol(&config).map_err(lib)?;
        let cells: Vec<_> = r.correlator_counts.iter().flatten().copied().collect();
        *out = CvbMcResult {
            has_s: i32::from(r.s_hat.is_some()),
            s_hat: r.s_hat.unwrap_or(f64::NAN),
            stderr_s: r.stderr_s.unwrap_or(f64::NAN),
            events: std::array::from_fn(|i| cells[i].events),
            sign_sums: std::array::from_fn(|i| cells[i].sign_sum),
            pulses: r.pulses,
            wall_sim_time: r.wall_sim_time,
            p_hat: r.p_hat,
        };
        Ok(())
    })
}

/// Seconds of data taking for a CHSH standard error `target_stderr`, with
/// equiprobable settings.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvb_acquisition_time(
    params: *const CvbParams,
    rep_rate: f64,
    target_stderr: f64,
    out: *mut f64,
) -> CvbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        let out = unsafe { slot(out, "out") }?;
        let bell = chsh(&p.inner).map_err(lib)?;
        *out = acquisition_time(bell.success_prob, rep_rate, target_stderr, &bell, [0.5, 0.5]).map_err(lib)?;
        Ok(())
    })
}
