//! Conditional two-mode state heralded by a double click on the tapped
//! modes, written as a signed mixture of four Gaussians.
//!
//! An on/off click on a mode is the POVM element `1 - |0><0|`. Its Wigner
//! kernel is `1 - 2 exp(-x^2 - p^2)`, so the product of two clicks expands
//! into four terms with weights `(1, -2, -2, 4)`. Integrating out C and D
//! from each term leaves a Gaussian on A, B with precision
//! `Gamma_AB - sigma (Gamma_CD + K_j)^-1 sigma^T`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4, Vector4};

use crate::error::{domain, Error, Result};
use crate::gaussian::{block_inverse_decompose, spd_inverse, CovarianceMatrix};

/// Heralding weights for (no projection, vacuum on C, vacuum on D, vacuum on both).
pub const HERALD_WEIGHTS: [i32; 4] = [1, -2, -2, 4];

/// Below this the success probability is treated as zero.
pub const MIN_SUCCESS_PROB: f64 = 1e-300;

/// Relative cancellation budget for the signed sum defining `P`.
const CANCELLATION_GUARD: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTerm {
    /// Heralding weight `q_j`.
    pub q: i32,
    /// Precision matrix `Gamma_j` of the unnormalized term `exp(-r^T Gamma_j r)`.
    pub precision: Matrix4<f64>,
    /// `sqrt(det Gamma_{j,CD})`.
    pub cd_det_factor: f64,
}

impl MixtureTerm {
    /// Weight of this term in the normalized mixture when each term is
    /// itself a normalized Gaussian density. The four weights sum to 1.
    pub fn probability_weight(&self, mixture: &SignedGaussianMixture) -> f64 {
        f64::from(self.q) * mixture.norm * PI * PI / (self.cd_det_factor * self.precision.determinant().sqrt())
    }
}

/// Conditional Wigner function `W(r) = norm * sum_j q_j / sqrt(det Gamma_jCD) exp(-r^T Gamma_j r)`
/// over `r = (x_A, p_A, x_B, p_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGaussianMixture {
    pub terms: [MixtureTerm; 4],
    /// `1 / (pi^2 P sqrt(det gamma_out))`.
    pub norm: f64,
    pub success_prob: f64,
}

impl SignedGaussianMixture {
    pub fn wigner(&self, r: &Vector4<f64>) -> f64 {
        self.norm
            * self
                .terms
                .iter()
                .map(|t| f64::from(t.q) / t.cd_det_factor * (-(r.transpose() * t.precision * r)[0]).exp())
                .sum::<f64>()
    }

    /// Normalized per-term weights, see [`MixtureTerm::probability_weight`].
    pub fn probability_weights(&self) -> [f64; 4] {
        std::array::from_fn(|j| self.terms[j].probability_weight(self))
    }

    /// The same state with modes A and B exchanged.
    pub fn swapped(&self) -> Self {
        let perm = [2, 3, 0, 1];
        let mut out = self.clone();
        for term in out.terms.iter_mut() {
            let p = term.precision;
            term.precision = Matrix4::from_fn(|i, j| p[(perm[i], perm[j])]);
        }
        out
    }
}

fn to_dmatrix(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(4, 4, m.as_slice())
}

fn to_matrix4(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_column_slice(m.as_slice())
}

/// `K_j`: identity added on C, D, or both.
fn cd_projection(j: usize) -> Matrix4<f64> {
    let (c, d) = match j {
        0 => (0.0, 0.0),
        1 => (1.0, 0.0),
        2 => (0.0, 1.0),
        _ => (1.0, 1.0),
    };
    Matrix4::from_diagonal(&Vector4::new(c, c, d, d))
}

struct Terms {
    terms: [MixtureTerm; 4],
    gamma_det_sqrt: f64,
    success_prob: f64,
}

fn build_terms(gamma_out: &CovarianceMatrix) -> Result<Terms> {
    let blocks = block_inverse_decompose(gamma_out)?;
    let gamma_det_sqrt = gamma_out.matrix().determinant().sqrt();
    let mut terms = Vec::with_capacity(4);
    let mut sum = 0.0;
    let mut magnitude = 0.0;
    for (j, &q) in HERALD_WEIGHTS.iter().enumerate() {
        let gamma_cd_j = blocks.gamma_cd + cd_projection(j);
        let cd_inv = to_matrix4(&spd_inverse(&to_dmatrix(&gamma_cd_j), "conditioning CD block")?);
        let precision = blocks.gamma_ab - blocks.sigma * cd_inv * blocks.sigma.transpose();
        let precision = (precision + precision.transpose()) * 0.5;
        let cd_det_factor = gamma_cd_j.determinant().sqrt();
        let term_det = precision.determinant();
        if !(term_det > 0.0) {
            return Err(Error::Singular {
                context: format!("conditional term {}", j + 1),
                condition: f64::INFINITY,
            });
        }
        let contribution = f64::from(q) / (cd_det_factor * term_det.sqrt());
        sum += contribution;
        magnitude += contribution.abs();
        terms.push(MixtureTerm {
            q,
            precision,
            cd_det_factor,
        });
    }
    let success_prob = sum / gamma_det_sqrt;
    let resolvable = sum > CANCELLATION_GUARD * magnitude;
    if !success_prob.is_finite() || success_prob < MIN_SUCCESS_PROB || !resolvable {
        return Err(Error::InvalidRegime(format!(
            "double-click probability {success_prob:.3e} is zero or below numerical resolution"
        )));
    }
    if success_prob > 1.0 + 1e-9 {
        return Err(Error::InvalidRegime(format!(
            "double-click probability {success_prob} exceeds 1"
        )));
    }
    Ok(Terms {
        terms: terms.try_into().expect("four heralding terms"),
        gamma_det_sqrt,
        success_prob,
    })
}

pub fn conditional_state(gamma_out: &CovarianceMatrix) -> Result<SignedGaussianMixture> {
    let Terms {
        terms,
        gamma_det_sqrt,
        success_prob,
    } = build_terms(gamma_out)?;
    Ok(SignedGaussianMixture {
        terms,
        norm: 1.0 / (PI * PI * success_prob * gamma_det_sqrt),
        success_prob,
    })
}

/// `P = det(gamma_out)^-1/2 sum_j q_j det(Gamma_j Gamma_jCD)^-1/2`.
pub fn success_probability(gamma_out: &CovarianceMatrix) -> Result<f64> {
    Ok(build_terms(gamma_out)?.success_prob)
}

/// Evaluates `W(offset * direction)` for every offset.
pub fn wigner_cut(
    state: &SignedGaussianMixture,
    direction: &Vector4<f64>,
    offsets: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(domain(format!(
            "cut direction must be a unit vector, has norm {}",
            direction.norm()
        )));
    }
    Ok(offsets
        .iter()
        .map(|&s| (s, state.wigner(&(direction * s))))
        .collect())
}

/// Unit direction of the `x_B = -x_A`, `p_A = p_B = 0` cut.
pub fn antidiagonal_direction() -> Vector4<f64> {
    Vector4::new(1.0, 0.0, -1.0, 0.0) / 2f64.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::output_covariance;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;

    fn fig2a_state() -> SignedGaussianMixture {
        conditional_state(&output_covariance(0.5, 0.95, 0.3, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn weights_and_shape() {
        let s = fig2a_state();
        let q: Vec<i32> = s.terms.iter().map(|t| t.q).collect();
        assert_eq!(q, vec![1, -2, -2, 4]);
        assert!(s.terms[0].precision.cholesky().is_some());
        for t in &s.terms {
            assert!((t.precision - t.precision.transpose()).amax() < 1e-12);
        }
        assert!(s.success_prob > 0.0 && s.success_prob <= 1.0);
        let total: f64 = s.probability_weights().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn vacuum_cannot_herald() {
        let g = output_covariance(0.0, 0.95, 0.3, 1.0).unwrap();
        assert!(matches!(conditional_state(&g), Err(Error::InvalidRegime(_))));
        assert!(matches!(success_probability(&g), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn tiny_squeezing_is_unresolvable() {
        let g = output_covariance(1e-6, 0.95, 0.3, 1.0).unwrap();
        assert!(matches!(success_probability(&g), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn success_probability_matches_quoted_value() {
        let p = success_probability(&output_covariance(0.6, 0.95, 0.3, 0.95).unwrap()).unwrap();
        assert!((p - 2.6e-4).abs() < 0.2 * 2.6e-4, "P = {p}");
        let rough = 0.3_f64.powi(2) * 0.05_f64.powi(2);
        assert!(p / rough > 0.5 && p / rough < 2.0);
    }

    #[test]
    fn success_probability_decreases_with_transmittance() {
        for &lambda in &[0.3, 0.5, 0.65] {
            let mut prev = f64::INFINITY;
            for k in 0..10 {
                let t = 0.85 + 0.014 * k as f64;
                let p = success_probability(&output_covariance(lambda, t, 0.3, 0.9).unwrap()).unwrap();
                assert!(p < prev);
                prev = p;
            }
        }
    }

    #[test]
    fn small_squeezing_scaling() {
        // For weak squeezing a click needs one photon in each arm:
        // P ~ eta^2 (1-T)^2 lambda^2.
        let (t, eta) = (0.9, 0.4);
        let lambda: f64 = 0.02;
        let p = success_probability(&output_covariance(lambda, t, eta, 1.0).unwrap()).unwrap();
        let approx = (eta * (1.0 - t) * lambda).powi(2);
        assert_relative_eq!(p, approx, max_relative = 0.01);
    }

    #[test]
    fn wigner_goes_negative_on_antidiagonal() {
        let s = fig2a_state();
        let offsets: Vec<f64> = (0..=120).map(|k| -3.0 + 0.05 * k as f64).collect();
        let cut = wigner_cut(&s, &antidiagonal_direction(), &offsets).unwrap();
        let min = cut.iter().map(|&(_, w)| w).fold(f64::INFINITY, f64::min);
        assert!(min < 0.0, "min W = {min}");
    }

    #[test]
    fn wigner_origin_and_tails() {
        let s = fig2a_state();
        let cut = wigner_cut(&s, &antidiagonal_direction(), &[0.0, -6.0, 6.0]).unwrap();
        assert!(cut[0].1.is_finite());
        assert!(cut[1].1.abs() < 1e-6 && cut[2].1.abs() < 1e-6);
        assert!(wigner_cut(&s, &Vector4::new(1.0, 1.0, 0.0, 0.0), &[0.0]).is_err());
    }

    #[test]
    fn wigner_symmetric_under_mode_swap() {
        let s = fig2a_state();
        let swapped = s.swapped();
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let r = Vector4::new(t.sin(), (1.3 * t).cos(), (0.7 * t).sin() - 0.2, 0.5 * t.cos());
            assert!((s.wigner(&r) - swapped.wigner(&r)).abs() < 1e-10);
        }
    }

    #[test]
    fn mixture_integrates_to_one() {
        // Each term is Gaussian, so a tensor rule integrates the mixture to
        // near machine precision; this checks the prefactors.
        let s = fig2a_state();
        let rule = GaussLegendre::on_interval(48, -6.0, 6.0);
        let mut total = 0.0;
        for &(a, wa) in rule.points() {
            for &(b, wb) in rule.points() {
                for &(c, wc) in rule.points() {
                    for &(d, wd) in rule.points() {
                        total += wa * wb * wc * wd * s.wigner(&Vector4::new(a, b, c, d));
                    }
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "integral = {total}");
    }
}
