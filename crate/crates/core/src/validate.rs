//! Cross-checks between the three independent routes: Gaussian closed form,
//! truncated Fock basis and Monte Carlo sampling.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bell::{
    quadrature_sign_correlation, rotated_marginal, sign_correlation, Angles, ExperimentParams,
    QUADRATURE_POINTS_PER_HALF_AXIS,
};
use crate::conditioning::{antidiagonal_direction, success_probability};
use crate::config::ValidateSection;
use crate::error::Result;
use crate::fock::{
    fock_click_frequency, fock_optimal_product, fock_sign_correlation, lossy_click_conditioning, FockState,
};
use crate::gaussian::tmsv_covariance;
use crate::mc::sample_joint_quadratures;
use crate::output::{Cell, Table};

pub const QUADRATURE_TOL: f64 = 1e-6;
pub const FOCK_E_TOL: f64 = 1e-4;
pub const FOCK_P_TOL: f64 = 1e-3;
pub const WIGNER_TOL: f64 = 1e-6;
pub const MC_SIGMAS: f64 = 3.0;

/// Parameter box for random draws: lambda, T, eta, eta_bhd.
pub const DRAW_BOX: [(f64, f64); 4] = [(0.3, 0.65), (0.9, 0.99), (0.1, 1.0), (0.85, 1.0)];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Measured discrepancy (or z-score) compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, tolerance: f64, started: Instant) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.abs() < tolerance,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["check", "value", "tolerance", "status", "seconds"]);
        for c in &self.checks {
            t.push(vec![
                c.name.as_str().into(),
                c.value.into(),
                c.tolerance.into(),
                if c.passed { "pass" } else { "FAIL" }.into(),
                Cell::Num(c.seconds),
            ]);
        }
        t
    }
}

/// Largest entrywise difference between Fock and Gaussian TMSV moments.
pub fn tmsv_moment_discrepancy(lambda: f64, n_trunc: usize) -> Result<f64> {
    let fock = FockState::tmsv(lambda, n_trunc)?.covariance();
    let gauss = tmsv_covariance(lambda)?;
    Ok((0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| (fock[(i, j)] - gauss.matrix()[(i, j)]).abs())
        .fold(0.0, f64::max))
}

/// Gaussian and Fock heralding probabilities.
pub fn success_probabilities(params: &ExperimentParams, n_trunc: usize) -> Result<(f64, f64)> {
    let gaussian = success_probability(&params.output_covariance()?)?;
    let (_, fock) = lossy_click_conditioning(params.lambda, params.transmittance, params.eta, n_trunc)?;
    Ok((gaussian, fock))
}

/// Largest relative Wigner discrepancy on the antidiagonal cut and at a few
/// off-cut points, over points where `|W| > 1e-8`.
pub fn wigner_discrepancy(params: &ExperimentParams, n_trunc: usize) -> Result<f64> {
    let state = params.conditional_state()?;
    let (rho, _) = lossy_click_conditioning(params.lambda, params.transmittance, params.eta, n_trunc)?;
    let rho = rho.with_loss(params.eta_bhd)?;
    let u = antidiagonal_direction();
    let mut points: Vec<Vector4<f64>> = (-60..=60).map(|i| u * (0.05 * i as f64)).collect();
    points.extend([
        Vector4::new(0.3, -0.7, 1.1, 0.2),
        Vector4::new(-1.4, 0.5, 0.0, -0.9),
        Vector4::new(0.8, 0.8, 0.8, 0.8),
    ]);
    let mut worst = 0.0_f64;
    for r in points {
        let g = state.wigner(&r);
        if g.abs() > 1e-8 {
            let f = rho.wigner([r[0], r[1], r[2], r[3]]);
            worst = worst.max(((g - f) / g).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawComparison {
    pub params: ExperimentParams,
    /// Extra random setting pair, checked alongside the four CHSH settings.
    pub theta: f64,
    pub phi: f64,
    pub max_quadrature_diff: f64,
    pub max_fock_diff: f64,
    /// Monte Carlo estimate at `(theta, phi)` and its z-score.
    pub mc_e: f64,
    pub mc_z: f64,
}

pub fn random_draw(rng: &mut impl Rng) -> (ExperimentParams, f64, f64) {
    let v = DRAW_BOX.map(|(lo, hi)| rng.random_range(lo..hi));
    let params = ExperimentParams::new(v[0], v[1], v[2], v[3]).expect("draw box is inside the domain");
    let theta = rng.random_range(-PI..PI);
    let phi = rng.random_range(-PI..PI);
    (params, theta, phi)
}

pub fn compare_draw(
    params: &ExperimentParams,
    theta: f64,
    phi: f64,
    n_trunc: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<DrawComparison> {
    let state = params.conditional_state()?;
    let (rho, _) = lossy_click_conditioning(params.lambda, params.transmittance, params.eta, n_trunc)?;
    let angles = Angles::default();
    let mut settings: Vec<(f64, f64)> = (0..2)
        .flat_map(|j| (0..2).map(move |k| (angles.alice(j), angles.bob(k))))
        .collect();
    settings.push((theta, phi));
    let mut max_quadrature_diff = 0.0_f64;
    let mut max_fock_diff = 0.0_f64;
    let mut closed_random = 0.0;
    for &(a, b) in &settings {
        let m = rotated_marginal(&state, a, b)?;
        let closed = sign_correlation(&m);
        let quad = quadrature_sign_correlation(&m, QUADRATURE_POINTS_PER_HALF_AXIS);
        let fock = fock_sign_correlation(&rho, a, b, params.eta_bhd)?;
        max_quadrature_diff = max_quadrature_diff.max((closed - quad).abs());
        max_fock_diff = max_fock_diff.max((closed - fock).abs());
        closed_random = closed;
    }
    let m = rotated_marginal(&state, theta, phi)?;
    let samples = sample_joint_quadratures(&m, mc_samples, seed)?;
    let n = samples.len() as f64;
    let mc_e = samples.iter().map(|&(x, y)| if (x >= 0.0) == (y >= 0.0) { 1.0 } else { -1.0 }).sum::<f64>() / n;
    let stderr = ((1.0 - closed_random * closed_random) / n).sqrt();
    Ok(DrawComparison {
        params: *params,
        theta,
        phi,
        max_quadrature_diff,
        max_fock_diff,
        mc_e,
        mc_z: (mc_e - closed_random) / stderr,
    })
}

/// Random draws with their per-draw seeds, reproducible from `seed`.
pub fn draws(count: usize, seed: u64) -> Vec<(ExperimentParams, f64, f64, u64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (p, t, f) = random_draw(&mut rng);
            (p, t, f, rng.random())
        })
        .collect()
}

pub fn run_validation(cfg: &ValidateSection, n_trunc: usize) -> Result<ValidationReport> {
    let mut checks = Vec::new();

    let t0 = Instant::now();
    checks.push(Check::below("tmsv_moments", tmsv_moment_discrepancy(0.6, n_trunc)?, 1e-8, t0));

    let realistic = ExperimentParams::new(0.6, 0.95, 0.3, 0.95)?;
    let t0 = Instant::now();
    let (pg, pf) = success_probabilities(&realistic, n_trunc)?;
    checks.push(Check::below("success_probability_fock", (pg - pf) / pf, FOCK_P_TOL, t0));

    let t0 = Instant::now();
    let trials = 2_000_000;
    let freq = fock_click_frequency(0.6, 0.95, 0.3, trials, cfg.seed)?;
    let z = (freq - pg) / (pg * (1.0 - pg) / trials as f64).sqrt();
    checks.push(Check::below("success_probability_photon_counting_z", z, 4.0, t0));

    let t0 = Instant::now();
    let cut = ExperimentParams::new(0.5, 0.95, 0.3, 1.0)?;
    checks.push(Check::below("wigner_fock", wigner_discrepancy(&cut, n_trunc)?, WIGNER_TOL, t0));

    let draws = draws(cfg.draws, cfg.seed);
    let compared: Vec<(usize, Result<DrawComparison>, f64)> = draws
        .par_iter()
        .enumerate()
        .map(|(i, &(p, theta, phi, seed))| {
            let t0 = Instant::now();
            let r = compare_draw(&p, theta, phi, n_trunc, cfg.mc_samples, seed);
            (i, r, t0.elapsed().as_secs_f64())
        })
        .collect();
    for (i, r, seconds) in compared {
        let d = r?;
        for (what, value, tol) in [
            ("quadrature", d.max_quadrature_diff, QUADRATURE_TOL),
            ("fock", d.max_fock_diff, FOCK_E_TOL),
            ("mc_z", d.mc_z, MC_SIGMAS),
        ] {
            checks.push(Check {
                name: format!("draw{i}_{what}"),
                value,
                tolerance: tol,
                passed: value.abs() < tol,
                seconds,
            });
        }
    }

    // band [0.55, 0.60] expressed as an offset from its centre
    for t in [0.9, 0.95, 0.99] {
        let t0 = Instant::now();
        let opt = fock_optimal_product(t, n_trunc)?;
        checks.push(Check::below(format!("fock_optimal_product_offset_T{t}"), opt.product - 0.575, 0.025, t0));
    }

    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible_and_in_the_box() {
        let a = draws(5, 1);
        assert_eq!(a, draws(5, 1));
        for (p, _, _, _) in a {
            assert!((0.3..0.65).contains(&p.lambda));
            assert!((0.85..1.0).contains(&p.eta_bhd));
        }
    }

    #[test]
    fn small_validation_run_passes() {
        let cfg = ValidateSection {
            draws: 2,
            seed: 5,
            mc_samples: 20_000,
        };
        let report = run_validation(&cfg, 30).unwrap();
        assert!(report.all_passed(), "{:?}", report.failures());
        assert_eq!(report.to_table().rows.len(), report.checks.len());
    }
}
