//! Gaussian closed forms against the photon-number-basis model.

use cvbell::bell::{rotated_marginal, sign_correlation};
use cvbell::conditioning::{antidiagonal_direction, success_probability};
use cvbell::fock::{
    fock_click_frequency, fock_optimal_product, fock_sign_correlation, lossy_click_conditioning,
    DEFAULT_TRUNCATION,
};
use cvbell::{chsh, Angles, ExperimentParams};
use nalgebra::Vector4;
use std::f64::consts::FRAC_PI_4;

#[test]
fn click_probability_matches_gaussian_formula() {
    let params = ExperimentParams::new(0.6, 0.95, 0.3, 1.0).unwrap();
    let gaussian = success_probability(&params.output_covariance().unwrap()).unwrap();
    let (_, fock) = lossy_click_conditioning(0.6, 0.95, 0.3, DEFAULT_TRUNCATION).unwrap();
    assert!(((gaussian - fock) / fock).abs() < 1e-3, "{gaussian} vs {fock}");
    // the agreement is in fact at rounding level
    assert!(((gaussian - fock) / fock).abs() < 1e-9);
}

#[test]
fn click_probability_matches_photon_counting_simulation() {
    let trials = 2_000_000;
    let (_, p) = lossy_click_conditioning(0.6, 0.8, 0.5, DEFAULT_TRUNCATION).unwrap();
    let freq = fock_click_frequency(0.6, 0.8, 0.5, trials, 11).unwrap();
    let stderr = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * stderr, "{freq} vs {p} (stderr {stderr})");
}

#[test]
fn sign_correlation_matches_fock_route() {
    let params = ExperimentParams::new(0.5, 0.95, 0.3, 1.0).unwrap();
    let state = params.conditional_state().unwrap();
    let (rho, _) = lossy_click_conditioning(0.5, 0.95, 0.3, DEFAULT_TRUNCATION).unwrap();
    for (theta, phi) in [(0.0, -FRAC_PI_4), (0.0, FRAC_PI_4), (0.4, 0.2), (1.3, -0.1)] {
        let closed = sign_correlation(&rotated_marginal(&state, theta, phi).unwrap());
        let fock = fock_sign_correlation(&rho, theta, phi, 1.0).unwrap();
        assert!((closed - fock).abs() < 1e-4, "({theta}, {phi}): {closed} vs {fock}");
    }
}

#[test]
fn homodyne_loss_agrees_between_routes() {
    let params = ExperimentParams::new(0.55, 0.92, 0.6, 0.9).unwrap();
    let gaussian = chsh(&params).unwrap();
    let (rho, _) = lossy_click_conditioning(0.55, 0.92, 0.6, DEFAULT_TRUNCATION).unwrap();
    let s = cvbell::fock::fock_chsh(&rho, &Angles::default(), 0.9).unwrap();
    assert!((gaussian.s - s).abs() < 4e-4, "{} vs {s}", gaussian.s);
}

#[test]
fn wigner_functions_agree_pointwise() {
    let params = ExperimentParams::new(0.5, 0.95, 0.3, 1.0).unwrap();
    let state = params.conditional_state().unwrap();
    let (rho, _) = lossy_click_conditioning(0.5, 0.95, 0.3, DEFAULT_TRUNCATION).unwrap();
    let u = antidiagonal_direction();
    let mut points: Vec<Vector4<f64>> = (-30..=30).map(|i| u * (0.1 * i as f64)).collect();
    points.push(Vector4::new(0.3, -0.7, 1.1, 0.2));
    points.push(Vector4::new(-1.4, 0.5, 0.0, -0.9));
    for r in points {
        let g = state.wigner(&r);
        let f = rho.wigner([r[0], r[1], r[2], r[3]]);
        if g.abs() > 1e-8 {
            assert!(((g - f) / g).abs() < 1e-6, "at {r:?}: {g} vs {f}");
        }
    }
}

#[test]
fn doubling_truncation_changes_nothing() {
    let (a, pa) = lossy_click_conditioning(0.6, 0.95, 0.3, 30).unwrap();
    let (b, pb) = lossy_click_conditioning(0.6, 0.95, 0.3, 60).unwrap();
    assert!((pa - pb).abs() < 1e-6 * pa);
    let ea = fock_sign_correlation(&a, 0.0, -FRAC_PI_4, 0.95).unwrap();
    let eb = fock_sign_correlation(&b, 0.0, -FRAC_PI_4, 0.95).unwrap();
    assert!((ea - eb).abs() < 1e-6);
}

#[test]
fn optimal_product_is_invariant_in_transmittance() {
    let lo = fock_optimal_product(0.9, DEFAULT_TRUNCATION).unwrap();
    let hi = fock_optimal_product(0.99, DEFAULT_TRUNCATION).unwrap();
    assert!((hi.product - 0.57).abs() < 0.02, "{hi:?}");
    assert!((lo.product - hi.product).abs() < 0.01, "{lo:?} vs {hi:?}");
    assert!(hi.s_max > 2.0 && lo.s_max > 2.0);
}
