//! Sign-binned quadrature correlators and the CHSH parameter.
//!
//! Alice measures `x_theta = cos(theta) x_A + sin(theta) p_A`, Bob measures
//! `x_phi` on mode B, and each outcome is binned to `+1` for `x >= 0` and
//! `-1` otherwise. Every Gaussian term of the conditional state has a
//! Gaussian `(x_theta, x_phi)` marginal, and for a zero-mean bivariate
//! Gaussian with correlation `rho` the orthant probability gives
//! `<sign(x) sign(y)> = (2 / pi) asin(rho)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix2, Matrix2x4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::{conditional_state, SignedGaussianMixture};
use crate::error::{domain, Error, Result};
use crate::gaussian::{output_covariance_with, BeamSplitterSign, CovarianceMatrix};
use crate::quadrature::GaussLegendre;
use crate::search::{golden_section_max, local_maxima};

pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Largest correlation magnitude fed to `asin`.
const RHO_CLAMP: f64 = 1.0 - 1e-12;

static CLAMPED_CORRELATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of times a numerically out-of-range correlation coefficient was
/// clamped by [`sign_correlation`] since process start.
pub fn clamped_correlation_count() -> usize {
    CLAMPED_CORRELATIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl Default for Angles {
    fn default() -> Self {
        Self {
            theta1: 0.0,
            theta2: FRAC_PI_2,
            phi1: -FRAC_PI_4,
            phi2: FRAC_PI_4,
        }
    }
}

impl Angles {
    pub fn alice(&self, j: usize) -> f64 {
        [self.theta1, self.theta2][j]
    }

    pub fn bob(&self, k: usize) -> f64 {
        [self.phi1, self.phi2][k]
    }

    /// Alice rotated by `+delta`, Bob by `-delta`. The conditional state is
    /// invariant under `exp(i delta (n_A - n_B))`, so every correlator is
    /// unchanged by this shift.
    pub fn counter_rotated(&self, delta: f64) -> Self {
        Self {
            theta1: self.theta1 + delta,
            theta2: self.theta2 + delta,
            phi1: self.phi1 - delta,
            phi2: self.phi2 - delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub lambda: f64,
    pub transmittance: f64,
    pub eta: f64,
    pub eta_bhd: f64,
    #[serde(default)]
    pub angles: Angles,
}

impl ExperimentParams {
    pub fn new(lambda: f64, transmittance: f64, eta: f64, eta_bhd: f64) -> Result<Self> {
        let p = Self {
            lambda,
            transmittance,
            eta,
            eta_bhd,
            angles: Angles::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Perfect photodetectors and homodyne detectors.
    pub fn ideal(lambda: f64, transmittance: f64) -> Result<Self> {
        Self::new(lambda, transmittance, 1.0, 1.0)
    }

    pub fn with_angles(mut self, angles: Angles) -> Self {
        self.angles = angles;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(domain(format!("lambda must lie in [0, 1), got {}", self.lambda)));
        }
        for (name, v) in [
            ("transmittance", self.transmittance),
            ("eta", self.eta),
            ("eta_bhd", self.eta_bhd),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(domain(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        let a = self.angles;
        if ![a.theta1, a.theta2, a.phi1, a.phi2].iter().all(|v| v.is_finite()) {
            return Err(domain("analysis angles must be finite"));
        }
        Ok(())
    }

    pub fn output_covariance(&self) -> Result<CovarianceMatrix> {
        self.output_covariance_with(BeamSplitterSign::Standard)
    }

    pub fn output_covariance_with(&self, sign: BeamSplitterSign) -> Result<CovarianceMatrix> {
        self.validate()?;
        output_covariance_with(self.lambda, self.transmittance, self.eta, self.eta_bhd, sign)
    }

    pub fn conditional_state(&self) -> Result<SignedGaussianMixture> {
        conditional_state(&self.output_covariance()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    /// `correlators[j][k] = E(theta_j, phi_k)`.
    pub correlators: [[f64; 2]; 2],
    pub s: f64,
    pub success_prob: f64,
}

impl BellResult {
    pub fn from_correlators(correlators: [[f64; 2]; 2], success_prob: f64) -> Self {
        let e = correlators;
        Self {
            correlators,
            s: e[0][0] + e[0][1] + e[1][0] - e[1][1],
            success_prob,
        }
    }
}

/// One zero-mean bivariate Gaussian of the `(x_theta^A, x_phi^B)` marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateTerm {
    /// Signed weight; the weights of a marginal sum to 1.
    pub weight: f64,
    /// Covariance of `(x_theta, x_phi)` with vacuum variance 1/2.
    pub cov: Matrix2<f64>,
}

impl BivariateTerm {
    pub fn correlation(&self) -> f64 {
        self.cov[(0, 1)] / (self.cov[(0, 0)] * self.cov[(1, 1)]).sqrt()
    }

    /// Normalized Gaussian density without the weight.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let det = self.cov.determinant();
        let (a, b, c) = (self.cov[(0, 0)], self.cov[(0, 1)], self.cov[(1, 1)]);
        let quad = (c * x * x - 2.0 * b * x * y + a * y * y) / det;
        (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
    }
}

/// Joint distribution of the two measured quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMarginal {
    pub terms: [BivariateTerm; 4],
}

impl QuadratureMarginal {
    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|t| t.weight * t.density(x, y)).sum()
    }

    /// Largest standard deviation along either axis over all terms.
    pub fn max_sigma(&self) -> (f64, f64) {
        self.terms.iter().fold((0.0_f64, 0.0_f64), |(sx, sy), t| {
            (sx.max(t.cov[(0, 0)].sqrt()), sy.max(t.cov[(1, 1)].sqrt()))
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

pub fn rotated_marginal(
    state: &SignedGaussianMixture,
    theta: f64,
    phi: f64,
) -> Result<QuadratureMarginal> {
    let projection = Matrix2x4::new(
        theta.cos(),
        theta.sin(),
        0.0,
        0.0,
        0.0,
        0.0,
        phi.cos(),
        phi.sin(),
    );
    let weights = state.probability_weights();
    let mut terms = Vec::with_capacity(4);
    for (j, term) in state.terms.iter().enumerate() {
        let singular = || Error::Singular {
            context: format!("marginal of conditional term {}", j + 1),
            condition: f64::INFINITY,
        };
        // exp(-r^T Gamma r) has covariance Gamma^-1 / 2.
        let cov4 = term.precision.cholesky().ok_or_else(singular)?.inverse() * 0.5;
        let cov = projection * cov4 * projection.transpose();
        let cov = (cov + cov.transpose()) * 0.5;
        if !(cov[(0, 0)] > 0.0 && cov.determinant() > 0.0) {
            return Err(singular());
        }
        terms.push(BivariateTerm {
            weight: weights[j],
            cov,
        });
    }
    Ok(QuadratureMarginal {
        terms: terms.try_into().expect("four terms"),
    })
}

/// Closed-form `E = sum_j w_j (2 / pi) asin(rho_j)`.
pub fn sign_correlation(marginal: &QuadratureMarginal) -> f64 {
    marginal
        .terms
        .iter()
        .map(|t| {
            let mut rho = t.correlation();
            if rho.abs() > RHO_CLAMP {
                CLAMPED_CORRELATIONS.fetch_add(1, Ordering::Relaxed);
                log::warn!("clamping correlation coefficient {rho}");
                rho = rho.clamp(-RHO_CLAMP, RHO_CLAMP);
            }
            t.weight * 2.0 / PI * rho.asin()
        })
        .sum()
}

/// Points per half-axis in [`quadrature_sign_correlation`].
pub const QUADRATURE_POINTS_PER_HALF_AXIS: usize = 48;

/// Direct 2D Gauss-Legendre integration of `sign(x y) P(x, y)` over
/// `[-6 sigma, 6 sigma]^2`. Each half-axis gets its own rule so that the sign
/// discontinuity sits on a panel boundary.
pub fn quadrature_sign_correlation(marginal: &QuadratureMarginal, points_per_half_axis: usize) -> f64 {
    let (sx, sy) = marginal.max_sigma();
    let rx = GaussLegendre::on_interval(points_per_half_axis, 0.0, 6.0 * sx);
    let ry = GaussLegendre::on_interval(points_per_half_axis, 0.0, 6.0 * sy);
    let mut total = 0.0;
    for &(x, wx) in rx.points() {
        for &(y, wy) in ry.points() {
            let same = marginal.density(x, y) + marginal.density(-x, -y);
            let opposite = marginal.density(x, -y) + marginal.density(-x, y);
            total += wx * wy * (same - opposite);
        }
    }
    total
}

/// Integral of the marginal density over `[-8 sigma, 8 sigma]^2`, for normalization checks.
pub fn quadrature_mass(marginal: &QuadratureMarginal, points_per_half_axis: usize) -> f64 {
    let (sx, sy) = marginal.max_sigma();
    let rx = GaussLegendre::on_interval(2 * points_per_half_axis, -8.0 * sx, 8.0 * sx);
    let ry = GaussLegendre::on_interval(2 * points_per_half_axis, -8.0 * sy, 8.0 * sy);
    rx.points()
        .iter()
        .map(|&(x, wx)| ry.points().iter().map(|&(y, wy)| wx * wy * marginal.density(x, y)).sum::<f64>())
        .sum()
}

/// The four marginals `[[(theta1, phi1), (theta1, phi2)], [(theta2, phi1), (theta2, phi2)]]`.
pub fn chsh_marginals(
    state: &SignedGaussianMixture,
    angles: &Angles,
) -> Result<[[QuadratureMarginal; 2]; 2]> {
    let m = |j: usize, k: usize| rotated_marginal(state, angles.alice(j), angles.bob(k));
    Ok([[m(0, 0)?, m(0, 1)?], [m(1, 0)?, m(1, 1)?]])
}

pub fn chsh(params: &ExperimentParams) -> Result<BellResult> {
    chsh_with_sign(params, BeamSplitterSign::Standard)
}

pub fn chsh_with_sign(params: &ExperimentParams, sign: BeamSplitterSign) -> Result<BellResult> {
    if params.lambda <= 0.0 {
        return Err(Error::InvalidRegime(
            "vacuum input (lambda = 0) cannot trigger the photodetectors".into(),
        ));
    }
    let state = conditional_state(&params.output_covariance_with(sign)?)?;
    let marginals = chsh_marginals(&state, &params.angles)?;
    let e = marginals.map(|row| row.map(|m| sign_correlation(&m)));
    Ok(BellResult::from_correlators(e, state.success_prob))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaOptimum {
    pub lambda: f64,
    pub s_max: f64,
}

pub const LAMBDA_SEARCH_MIN: f64 = 0.01;
pub const LAMBDA_SEARCH_MAX: f64 = 0.95;
pub const LAMBDA_TOL: f64 = 1e-4;
const PRESCAN_POINTS: usize = 20;
const MULTIMODAL_GAP: f64 = 0.005;

/// Maximizes S over the squeezing with the other parameters fixed: a
/// 20-point pre-scan locates the peak, golden-section search refines it.
pub fn optimize_lambda(transmittance: f64, eta: f64, eta_bhd: f64, angles: Angles) -> Result<LambdaOptimum> {
    let base = ExperimentParams::new(0.5, transmittance, eta, eta_bhd)?.with_angles(angles);
    let s_at = |lambda: f64| {
        chsh(&ExperimentParams { lambda, ..base })
            .map(|r| r.s)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let step = (LAMBDA_SEARCH_MAX - LAMBDA_SEARCH_MIN) / (PRESCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|i| LAMBDA_SEARCH_MIN + step * i as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&l| s_at(l)).collect();
    let peaks = local_maxima(&values);
    let best = *peaks
        .iter()
        .max_by(|&&a, &&b| values[a].total_cmp(&values[b]))
        .ok_or_else(|| Error::InvalidRegime("S is undefined over the whole squeezing range".into()))?;
    for &other in &peaks {
        if other.abs_diff(best) > 1 && (values[other] - values[best]).abs() < MULTIMODAL_GAP {
            return Err(Error::Multimodal {
                first: grid[best],
                second: grid[other],
            });
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (lambda, s_max) = golden_section_max(s_at, lo, hi, LAMBDA_TOL);
    Ok(LambdaOptimum { lambda, s_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    Eta,
    EtaBhd,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Eta => "eta",
            SweepAxis::EtaBhd => "eta_bhd",
        }
    }

    pub fn apply(self, params: &ExperimentParams, value: f64) -> ExperimentParams {
        let mut p = *params;
        match self {
            SweepAxis::Lambda => p.lambda = value,
            SweepAxis::Eta => p.eta = value,
            SweepAxis::EtaBhd => p.eta_bhd = value,
        }
        p
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "eta" => Ok(SweepAxis::Eta),
            "eta_bhd" => Ok(SweepAxis::EtaBhd),
            other => Err(domain(format!(
                "unknown sweep axis '{other}', expected lambda, eta or eta_bhd"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<BellResult>,
}

/// One `chsh` evaluation per grid point, in parallel, ordered by axis value.
/// Per-point failures are kept in the row.
pub fn sweep(axis: SweepAxis, grid: &[f64], fixed: &ExperimentParams) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&value| SweepRow {
            value,
            outcome: chsh(&axis.apply(fixed, value)),
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fig2a() -> ExperimentParams {
        ExperimentParams::new(0.5, 0.95, 0.3, 1.0).unwrap()
    }

    #[test]
    fn single_term_limits() {
        let term = |rho: f64| QuadratureMarginal {
            terms: [
                BivariateTerm {
                    weight: 1.0,
                    cov: Matrix2::new(0.5, 0.5 * rho, 0.5 * rho, 0.5),
                },
                BivariateTerm {
                    weight: 0.0,
                    cov: Matrix2::identity(),
                },
                BivariateTerm {
                    weight: 0.0,
                    cov: Matrix2::identity(),
                },
                BivariateTerm {
                    weight: 0.0,
                    cov: Matrix2::identity(),
                },
            ],
        };
        assert_eq!(sign_correlation(&term(0.0)), 0.0);
        assert!((sign_correlation(&term(1.0 - 1e-15)) - 1.0).abs() < 1e-5);
        let before = clamped_correlation_count();
        assert!(sign_correlation(&term(1.0 + 1e-9)) <= 1.0);
        assert!(clamped_correlation_count() > before);
    }

    #[test]
    fn weakly_squeezed_limit_is_uncorrelated() {
        // As lambda -> 0 the heralded state tends to the vacuum product state.
        let p = ExperimentParams::new(1e-3, 0.9, 1.0, 1.0).unwrap();
        let state = p.conditional_state().unwrap();
        let m = rotated_marginal(&state, 0.0, 0.0).unwrap();
        let cross: f64 = m.terms.iter().map(|t| t.weight * t.cov[(0, 1)]).sum();
        assert!(cross.abs() < 0.01, "cross covariance {cross}");
        let e = sign_correlation(&m);
        assert!(e.abs() < 0.01, "E = {e}");
    }

    #[test]
    fn marginal_terms_are_positive_definite_and_normalized() {
        let state = fig2a().conditional_state().unwrap();
        let m = rotated_marginal(&state, 0.3, -1.1).unwrap();
        for t in &m.terms {
            assert!(t.cov.cholesky().is_some());
            assert!((t.cov - t.cov.transpose()).amax() < 1e-15);
        }
        assert_abs_diff_eq!(m.total_weight(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(quadrature_mass(&m, 48), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let state = fig2a().conditional_state().unwrap();
        let m = rotated_marginal(&state, 0.0, -FRAC_PI_4).unwrap();
        let closed = sign_correlation(&m);
        let quad = quadrature_sign_correlation(&m, QUADRATURE_POINTS_PER_HALF_AXIS);
        assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
    }

    #[test]
    fn s_max_at_high_transmittance() {
        let t = 0.99;
        let r = chsh(&ExperimentParams::ideal(0.57 / t, t).unwrap()).unwrap();
        assert!((r.s - 2.046).abs() < 0.005, "S = {}", r.s);
    }

    #[test]
    fn realistic_point() {
        let r = chsh(&ExperimentParams::new(0.6, 0.95, 0.3, 0.95).unwrap()).unwrap();
        assert!((r.s - 2.02).abs() < 0.01, "S = {}", r.s);
        assert_eq!(r.s, r.correlators[0][0] + r.correlators[0][1] + r.correlators[1][0] - r.correlators[1][1]);
    }

    #[test]
    fn degenerate_angles_do_not_violate() {
        let p = ExperimentParams::ideal(0.57, 0.99).unwrap().with_angles(Angles {
            theta1: 0.0,
            theta2: 0.0,
            phi1: 0.0,
            phi2: 0.0,
        });
        let r = chsh(&p).unwrap();
        assert!(r.s.abs() <= 2.0);
        assert_abs_diff_eq!(r.s, 2.0 * r.correlators[0][0], epsilon = 1e-12);
    }

    #[test]
    fn vacuum_is_invalid_regime() {
        let p = ExperimentParams::new(0.0, 0.95, 0.3, 0.95).unwrap();
        assert!(matches!(chsh(&p), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn params_validation() {
        assert!(ExperimentParams::new(1.0, 0.9, 0.3, 0.9).is_err());
        assert!(ExperimentParams::new(0.5, 0.0, 0.3, 0.9).is_err());
        assert!(ExperimentParams::new(0.5, 0.9, 0.0, 0.9).is_err());
        assert!(ExperimentParams::new(0.5, 0.9, 0.3, 1.1).is_err());
    }

    #[test]
    fn counter_rotation_leaves_s_unchanged() {
        let p = fig2a();
        let base = chsh(&p).unwrap();
        for delta in [0.1, 0.77, -1.3, 2.9] {
            let r = chsh(&p.with_angles(p.angles.counter_rotated(delta))).unwrap();
            assert!((r.s - base.s).abs() < 1e-9);
        }
    }

    #[test]
    fn beam_splitter_sign_is_unobservable() {
        let p = ExperimentParams::new(0.55, 0.93, 0.4, 0.9).unwrap();
        let a = chsh_with_sign(&p, BeamSplitterSign::Standard).unwrap();
        let b = chsh_with_sign(&p, BeamSplitterSign::Flipped).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((a.correlators[j][k] - b.correlators[j][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn optimum_is_local_maximum() {
        let opt = optimize_lambda(0.95, 1.0, 1.0, Angles::default()).unwrap();
        assert!(opt.s_max > 2.0 && opt.s_max < 2.05);
        let lower = optimize_lambda(0.9, 1.0, 1.0, Angles::default()).unwrap();
        assert!(opt.s_max > lower.s_max);
        for d in [-0.05, 0.05] {
            let s = chsh(&ExperimentParams::ideal(opt.lambda + d, 0.95).unwrap()).unwrap().s;
            assert!(s < opt.s_max);
        }
    }

    #[test]
    fn sweep_records_failures_and_orders_rows() {
        let fixed = ExperimentParams::new(0.5, 0.95, 0.3, 1.0).unwrap();
        let rows = sweep(SweepAxis::Lambda, &[0.5, 0.0, 1e-7, 0.3], &fixed);
        let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![0.0, 1e-7, 0.3, 0.5]);
        assert!(matches!(rows[0].outcome, Err(Error::InvalidRegime(_))));
        assert!(matches!(rows[1].outcome, Err(Error::InvalidRegime(_))));
        assert!(rows[2].outcome.is_ok() && rows[3].outcome.is_ok());
    }

    #[test]
    fn sweep_axis_parsing() {
        assert_eq!("eta_bhd".parse::<SweepAxis>().unwrap(), SweepAxis::EtaBhd);
        assert!("T".parse::<SweepAxis>().is_err());
    }
}
