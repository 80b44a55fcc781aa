use std::ffi::CStr;
use std::ptr;

use cvbell_ffi::*;

fn params(lambda: f64) -> *mut CvbParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cvb_params_new(lambda, 0.95, 0.3, 0.95, &mut p) }, CvbStatus::Ok);
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cvb_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn chsh_matches_the_library() {
    let p = params(0.6);
    let mut r = CvbBellResult::default();
    assert_eq!(unsafe { cvb_chsh(p, &mut r) }, CvbStatus::Ok);
    let direct = cvbell::chsh(&cvbell::ExperimentParams::new(0.6, 0.95, 0.3, 0.95).unwrap()).unwrap();
    assert_eq!(r.s, direct.s);
    assert_eq!(r.correlators[3], direct.correlators[1][1]);
    let mut prob = 0.0;
    assert_eq!(unsafe { cvb_success_probability(p, &mut prob) }, CvbStatus::Ok);
    assert_eq!(prob, r.success_prob);
    unsafe { cvb_params_free(p) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cvb_params_new(0.6, 1.5, 0.3, 0.95, &mut p) }, CvbStatus::Domain);
    assert!(p.is_null());
    assert!(last_error().contains("domain"));

    let vacuum = params(0.0);
    let mut r = CvbBellResult::default();
    assert_eq!(unsafe { cvb_chsh(vacuum, &mut r) }, CvbStatus::InvalidRegime);
    assert!(last_error().contains("invalid regime"));
    assert_eq!(unsafe { cvb_chsh(ptr::null(), &mut r) }, CvbStatus::NullPointer);
    assert_eq!(unsafe { cvb_chsh(vacuum, ptr::null_mut()) }, CvbStatus::NullPointer);
    unsafe { cvb_params_free(vacuum) };
    unsafe { cvb_params_free(ptr::null_mut()) };
}

#[test]
fn state_handle_evaluates_the_wigner_function() {
    let p = params(0.5);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cvb_state_new(p, &mut s) }, CvbStatus::Ok);
    let r = [0.0; 4];
    let mut w = 0.0;
    assert_eq!(unsafe { cvb_state_wigner(s, r.as_ptr(), &mut w) }, CvbStatus::Ok);
    assert!(w.is_finite());
    assert_eq!(unsafe { cvb_state_wigner(s, ptr::null(), &mut w) }, CvbStatus::NullPointer);
    unsafe {
        cvb_state_free(s);
        cvb_params_free(p);
    }
}

#[test]
fn optimizer_and_protocol() {
    let (mut lambda, mut s) = (0.0, 0.0);
    assert_eq!(unsafe { cvb_optimize_lambda(0.99, 1.0, 1.0, &mut lambda, &mut s) }, CvbStatus::Ok);
    assert!((s - 2.046).abs() < 0.005);

    let p = params(0.6);
    let mut a = CvbMcResult::default();
    let mut b = CvbMcResult::default();
    assert_eq!(unsafe { cvb_run_protocol(p, 10_000, 3, 1e6, &mut a) }, CvbStatus::Ok);
    assert_eq!(unsafe { cvb_run_protocol(p, 10_000, 3, 1e6, &mut b) }, CvbStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(a.has_s, 1);
    assert_eq!(a.events.iter().sum::<u64>(), 10_000);

    let mut t = 0.0;
    assert_eq!(unsafe { cvb_acquisition_time(p, 1e6, 0.005, &mut t) }, CvbStatus::Ok);
    assert!(t > 0.0 && t < 3600.0);
    assert_eq!(unsafe { cvb_acquisition_time(p, 1e6, 0.0, &mut t) }, CvbStatus::Domain);
    unsafe { cvb_params_free(p) };
}

#[test]
fn custom_angles_are_applied() {
    let p = params(0.6);
    let mut r = CvbBellResult::default();
    assert_eq!(unsafe { cvb_params_set_angles(p, 0.0, 0.0, 0.0, 0.0) }, CvbStatus::Ok);
    assert_eq!(unsafe { cvb_chsh(p, &mut r) }, CvbStatus::Ok);
    // all four settings coincide: S = 2 E
    assert!((r.s - 2.0 * r.correlators[0]).abs() < 1e-12);
    unsafe { cvb_params_free(p) };
}
