//! Truncated photon-number-basis model of the whole experiment.
//!
//! This is an independent route to every quantity the Gaussian formalism
//! produces: heralding probabilities, the conditional state, its Wigner
//! function and the sign-binned homodyne correlators. Nothing here uses
//! covariance matrices except [`FockState::covariance`], which exists to
//! compare against them.
//!
//! Two-mode density matrices are stored densely as `rho[a, b; c, d] =
//! <a, b| rho |c, d>`, indices below the truncation `N`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Geometric};

use crate::bell::Angles;
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::search::{golden_section_max, local_maxima};

pub const DEFAULT_TRUNCATION: usize = 40;
pub const MIN_TRUNCATION: usize = 16;
const TAIL_LIMIT: f64 = 1e-8;

/// Half-width of the homodyne integration window.
pub const QUADRATURE_WINDOW: f64 = 8.0;
/// Grid points per axis for the homodyne integrals (split evenly at 0).
pub const QUADRATURE_POINTS: usize = 400;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Amplitude `sqrt(C(n, k)) t^{(n-k)/2} (1-t)^{k/2}` of routing `k` of `n`
/// photons out of a beam splitter with transmittance `t`.
fn routing_amplitude(lnf: &[f64], n: usize, k: usize, t: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let ln_binom = lnf[n] - lnf[k] - lnf[n - k];
    let mut ln = 0.5 * ln_binom;
    if n > k {
        if t == 0.0 {
            return 0.0;
        }
        ln += 0.5 * (n - k) as f64 * t.ln();
    }
    if k > 0 {
        if t == 1.0 {
            return 0.0;
        }
        ln += 0.5 * k as f64 * (1.0 - t).ln();
    }
    ln.exp()
}

fn check_truncation(n_trunc: usize) -> Result<()> {
    if n_trunc < MIN_TRUNCATION {
        return Err(domain(format!(
            "Fock truncation must be at least {MIN_TRUNCATION}, got {n_trunc}"
        )));
    }
    Ok(())
}

/// Probability above `n = N - 4` for populations `p[n]` summing to `total`.
fn check_tail(populations: &[f64], total: f64) -> Result<()> {
    let cutoff = populations.len() - 4;
    let tail: f64 = populations[cutoff..].iter().sum::<f64>() / total;
    if tail > TAIL_LIMIT {
        return Err(Error::Truncation { cutoff, tail });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    X,
    P,
}

/// Pure two-mode state with amplitudes indexed by `(n_A, n_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    n_trunc: usize,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    /// Builds a normalized state from amplitudes on `|n, n>`.
    pub fn diagonal(coefficients: &[f64]) -> Result<Self> {
        let n_trunc = coefficients.len();
        check_truncation(n_trunc)?;
        let populations: Vec<f64> = coefficients.iter().map(|c| c * c).collect();
        let total: f64 = populations.iter().sum();
        if !(total > 0.0) {
            return Err(domain("state has zero norm"));
        }
        check_tail(&populations, total)?;
        let scale = total.sqrt().recip();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_trunc * n_trunc];
        for (n, &c) in coefficients.iter().enumerate() {
            amplitudes[n * n_trunc + n] = Complex64::new(c * scale, 0.0);
        }
        Ok(Self { n_trunc, amplitudes })
    }

    /// `sqrt(1 - l^2) sum_n l^n |n, n>`.
    pub fn tmsv(lambda: f64, n_trunc: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(domain(format!("lambda must lie in [0, 1), got {lambda}")));
        }
        let c: Vec<f64> = (0..n_trunc).map(|n| lambda.powi(n as i32)).collect();
        Self::diagonal(&c)
    }

    pub fn truncation(&self) -> usize {
        self.n_trunc
    }

    pub fn amplitude(&self, a: usize, b: usize) -> Complex64 {
        self.amplitudes[a * self.n_trunc + b]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Applies `x` or `p` of mode 0 (A) or 1 (B); the top level is truncated.
    fn apply_quadrature(&self, mode: usize, q: Quadrature) -> Vec<Complex64> {
        let n = self.n_trunc;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // x = (a + a^dag) / sqrt 2, p = -i (a - a^dag) / sqrt 2
        let (lower, raise) = match q {
            Quadrature::X => (Complex64::new(s, 0.0), Complex64::new(s, 0.0)),
            Quadrature::P => (Complex64::new(0.0, -s), Complex64::new(0.0, s)),
        };
        for a in 0..n {
            for b in 0..n {
                let amp = self.amplitudes[a * n + b];
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let k = if mode == 0 { a } else { b };
                let idx = |level: usize| if mode == 0 { level * n + b } else { a * n + level };
                if k > 0 {
                    out[idx(k - 1)] += lower * (k as f64).sqrt() * amp;
                }
                if k + 1 < n {
                    out[idx(k + 1)] += raise * ((k + 1) as f64).sqrt() * amp;
                }
            }
        }
        out
    }

    /// Second moments `<r_i r_j + r_j r_i>` over `(x_A, p_A, x_B, p_B)`, in
    /// the vacuum-equals-identity normalization (the state has zero mean).
    pub fn covariance(&self) -> Matrix4<f64> {
        let ops = [
            (0, Quadrature::X),
            (0, Quadrature::P),
            (1, Quadrature::X),
            (1, Quadrature::P),
        ];
        let v: Vec<Vec<Complex64>> = ops.iter().map(|&(m, q)| self.apply_quadrature(m, q)).collect();
        Matrix4::from_fn(|i, j| {
            let inner: Complex64 = v[i].iter().zip(&v[j]).map(|(x, y)| x.conj() * y).sum();
            2.0 * inner.re
        })
    }

    pub fn to_density_matrix(&self) -> FockDensityMatrix {
        let n = self.n_trunc;
        let n2 = n * n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n2 * n2];
        for (row, &x) in self.amplitudes.iter().enumerate() {
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (col, &y) in self.amplitudes.iter().enumerate() {
                entries[row * n2 + col] = x * y.conj();
            }
        }
        FockDensityMatrix { n_trunc: n, entries }
    }
}

/// Two-mode density matrix in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    n_trunc: usize,
    entries: Vec<Complex64>,
}

impl FockDensityMatrix {
    pub fn truncation(&self) -> usize {
        self.n_trunc
    }

    #[inline]
    fn index(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        let n = self.n_trunc;
        ((a * n + b) * n + c) * n + d
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        self.entries[self.index(a, b, c, d)]
    }

    pub fn trace(&self) -> f64 {
        let n = self.n_trunc;
        let mut t = 0.0;
        for a in 0..n {
            for b in 0..n {
                t += self.get(a, b, a, b).re;
            }
        }
        t
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n2 = self.n_trunc * self.n_trunc;
        let mut worst = 0.0_f64;
        for row in 0..n2 {
            for col in row..n2 {
                let d = self.entries[row * n2 + col] - self.entries[col * n2 + row].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the `N^2 x N^2` matrix. Dense and slow for
    /// large truncations.
    pub fn min_eigenvalue(&self) -> f64 {
        let n2 = self.n_trunc * self.n_trunc;
        let m = DMatrix::from_row_slice(n2, n2, &self.entries);
        let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        m.symmetric_eigen().eigenvalues.min()
    }

    /// Photon-number distribution of mode 0 (A) or 1 (B).
    pub fn photon_distribution(&self, mode: usize) -> Vec<f64> {
        let n = self.n_trunc;
        let mut p = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                let k = if mode == 0 { a } else { b };
                p[k] += self.get(a, b, a, b).re;
            }
        }
        p
    }

    fn scale(&mut self, factor: f64) {
        for z in &mut self.entries {
            *z *= factor;
        }
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with(&self, psi: &FockState) -> f64 {
        assert_eq!(psi.n_trunc, self.n_trunc, "truncations differ");
        let n2 = self.n_trunc * self.n_trunc;
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..n2 {
            let x = psi.amplitudes[row];
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for col in 0..n2 {
                acc += x.conj() * self.entries[row * n2 + col] * psi.amplitudes[col];
            }
        }
        acc.re
    }

    /// Pure loss with transmittance `eta` on mode 0 (A) or 1 (B), realized
    /// as a beam splitter to a vacuum mode that is traced out.
    pub fn with_mode_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!("loss transmittance must lie in (0, 1], got {eta}")));
        }
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let n = self.n_trunc;
        let lnf = ln_factorials(n);
        // kraus[m][k]: amplitude of losing k photons out of m
        let kraus: Vec<Vec<f64>> = (0..n)
            .map(|m| (0..n).map(|k| routing_amplitude(&lnf, m, k, eta)).collect())
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.entries.len()];
        for a in 0..n {
            for c in 0..n {
                for k in 0..n - a.max(c) {
                    let w = kraus[a + k][k] * kraus[c + k][k];
                    if w == 0.0 {
                        continue;
                    }
                    for b in 0..n {
                        for d in 0..n {
                            let (src, dst) = if mode == 0 {
                                (self.index(a + k, b, c + k, d), self.index(a, b, c, d))
                            } else {
                                (self.index(b, a + k, d, c + k), self.index(b, a, d, c))
                            };
                            out[dst] += self.entries[src] * w;
                        }
                    }
                }
            }
        }
        Ok(Self {
            n_trunc: n,
            entries: out,
        })
    }

    /// Equal loss on both modes, as in front of the two homodyne detectors.
    pub fn with_loss(&self, eta: f64) -> Result<Self> {
        self.with_mode_loss(0, eta)?.with_mode_loss(1, eta)
    }

    /// `sum rho[a,b;c,d] A[a,c] B[b,d]` for single-mode kernels `A`, `B`.
    fn contract(&self, ka: &[Complex64], kb: &[Complex64]) -> Complex64 {
        let n = self.n_trunc;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let wa = ka[a * n + c];
                    if wa == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let base = self.index(a, b, c, 0);
                    let mut inner = Complex64::new(0.0, 0.0);
                    for d in 0..n {
                        inner += self.entries[base + d] * kb[b * n + d];
                    }
                    acc += wa * inner;
                }
            }
        }
        acc
    }

    /// Wigner function at `r = (x_A, p_A, x_B, p_B)`.
    pub fn wigner(&self, r: [f64; 4]) -> f64 {
        let wa = single_mode_wigner_table(self.n_trunc, r[0], r[1]);
        let wb = single_mode_wigner_table(self.n_trunc, r[2], r[3]);
        self.contract(&wa, &wb).re
    }
}

/// Table of Wigner functions of `|n><m|` at `(x, p)`, normalized so that the
/// vacuum is `exp(-x^2 - p^2) / pi`:
/// `W_nm = (-1)^m / pi sqrt(m!/n!) (sqrt2 (x - i p))^{n-m} e^{-|z|^2} L_m^{(n-m)}(2|z|^2)`
/// for `n >= m`, and `W_mn = conj(W_nm)`.
fn single_mode_wigner_table(n_trunc: usize, x: f64, p: f64) -> Vec<Complex64> {
    let lnf = ln_factorials(n_trunc);
    let r2 = x * x + p * p;
    let y = 2.0 * r2;
    let radius = (2.0 * r2).sqrt();
    let angle = -p.atan2(x);
    let mut table = vec![Complex64::new(0.0, 0.0); n_trunc * n_trunc];
    for alpha in 0..n_trunc {
        // generalized Laguerre L_m^{(alpha)}(y) for m = 0 .. n_trunc - alpha
        let count = n_trunc - alpha;
        let a = alpha as f64;
        let mut lag = vec![0.0; count];
        lag[0] = 1.0;
        if count > 1 {
            lag[1] = 1.0 + a - y;
        }
        for k in 1..count.saturating_sub(1) {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + a - y) * lag[k] - (kf + a) * lag[k - 1]) / (kf + 1.0);
        }
        for (m, &l) in lag.iter().enumerate() {
            let n = m + alpha;
            let magnitude = if alpha > 0 && radius == 0.0 {
                0.0
            } else {
                let power = if alpha > 0 { a * radius.ln() } else { 0.0 };
                (0.5 * (lnf[m] - lnf[n]) + power - r2).exp()
            };
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let value = Complex64::from_polar(sign * magnitude * l / PI, a * angle);
            table[n * n_trunc + m] = value;
            if alpha > 0 {
                table[m * n_trunc + n] = value.conj();
            }
        }
    }
    table
}

/// Heralds on the reflected light of both tap beam splitters. `response(k)`
/// is the probability that a detector seeing `k` photons fires. Returns the
/// normalized conditional state and the heralding probability.
fn herald(
    lambda: f64,
    transmittance: f64,
    n_trunc: usize,
    response: impl Fn(usize) -> f64,
) -> Result<(FockDensityMatrix, f64)> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(domain(format!(
            "transmittance must lie in (0, 1], got {transmittance}"
        )));
    }
    let source = FockState::tmsv(lambda, n_trunc)?;
    let n = n_trunc;
    let lnf = ln_factorials(n);
    let c: Vec<f64> = (0..n).map(|k| source.amplitude(k, k).re).collect();
    let route: Vec<Vec<f64>> = (0..n)
        .map(|m| (0..n).map(|k| routing_amplitude(&lnf, m, k, transmittance)).collect())
        .collect();
    let mut rho = FockDensityMatrix {
        n_trunc: n,
        entries: vec![Complex64::new(0.0, 0.0); n.pow(4)],
    };
    // Reflecting k photons of mode A into C and l of B into D maps |m, m> to
    // |m-k, m-l>. The reflected-mode phase (-1)^(k+l) cancels in the projector.
    for k in 0..n {
        let fk = response(k);
        if fk == 0.0 {
            continue;
        }
        for l in 0..n {
            let f = fk * response(l);
            if f == 0.0 {
                continue;
            }
            let start = k.max(l);
            let phi: Vec<f64> = (start..n).map(|m| c[m] * route[m][k] * route[m][l]).collect();
            for (i, m) in (start..n).enumerate() {
                for (j, mp) in (start..n).enumerate() {
                    let idx = rho.index(m - k, m - l, mp - k, mp - l);
                    rho.entries[idx] += f * phi[i] * phi[j];
                }
            }
        }
    }
    let probability = rho.trace();
    if !(probability > 0.0) {
        return Err(Error::InvalidRegime(
            "heralding probability is zero (no photons reach the detectors)".into(),
        ));
    }
    rho.scale(probability.recip());
    Ok((rho, probability))
}

/// Conditions on clicks of two on/off detectors of efficiency `eta`, each
/// modelled as loss followed by the POVM `1 - |0><0|`.
pub fn lossy_click_conditioning(
    lambda: f64,
    transmittance: f64,
    eta: f64,
    n_trunc: usize,
) -> Result<(FockDensityMatrix, f64)> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    herald(lambda, transmittance, n_trunc, |k| 1.0 - (1.0 - eta).powi(k as i32))
}

/// Projects both tapped modes onto exactly one photon.
pub fn single_photon_conditioning(
    lambda: f64,
    transmittance: f64,
    n_trunc: usize,
) -> Result<(FockDensityMatrix, f64)> {
    herald(lambda, transmittance, n_trunc, |k| if k == 1 { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtractedState {
    /// Normalized `sum_n (n+1) (T lambda)^n |n, n>`.
    pub state: FockState,
    /// Exact state heralded by two ideal on/off detectors at finite `T`.
    pub click_projected: FockDensityMatrix,
    pub click_probability: f64,
    /// `<state| click_projected |state>`.
    pub fidelity: f64,
}

pub fn ideal_subtracted_state(lambda: f64, transmittance: f64, n_trunc: usize) -> Result<SubtractedState> {
    let product = lambda * transmittance;
    if !(product > 0.0) {
        return Err(Error::InvalidRegime(
            "lambda * T = 0: the subtracted state is undefined".into(),
        ));
    }
    if product >= 0.95 {
        return Err(domain(format!("lambda * T must be below 0.95, got {product}")));
    }
    let coefficients: Vec<f64> = (0..n_trunc)
        .map(|n| (n + 1) as f64 * product.powi(n as i32))
        .collect();
    let state = FockState::diagonal(&coefficients)?;
    let (click_projected, click_probability) = lossy_click_conditioning(lambda, transmittance, 1.0, n_trunc)?;
    let fidelity = click_projected.fidelity_with(&state);
    Ok(SubtractedState {
        state,
        click_projected,
        click_probability,
        fidelity,
    })
}

/// Single-mode kernels `e^{-i (n-m) theta} int sign(x) psi_n psi_m dx` and
/// `int psi_n psi_m dx` over the integration window.
struct HomodyneKernels {
    sign: Vec<f64>,
    mass: Vec<f64>,
}

fn hermite_functions(n_trunc: usize, x: f64) -> Vec<f64> {
    let mut psi = vec![0.0; n_trunc];
    psi[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n_trunc > 1 {
        psi[1] = std::f64::consts::SQRT_2 * x * psi[0];
    }
    for n in 2..n_trunc {
        let nf = n as f64;
        psi[n] = (2.0 / nf).sqrt() * x * psi[n - 1] - ((nf - 1.0) / nf).sqrt() * psi[n - 2];
    }
    psi
}

impl HomodyneKernels {
    fn new(n_trunc: usize) -> Self {
        // Positive half-line only: psi_n psi_m has parity (-1)^(n+m).
        let rule = GaussLegendre::on_interval(QUADRATURE_POINTS / 2, 0.0, QUADRATURE_WINDOW);
        let mut half = vec![0.0; n_trunc * n_trunc];
        for &(x, w) in rule.points() {
            let psi = hermite_functions(n_trunc, x);
            for n in 0..n_trunc {
                for m in 0..n_trunc {
                    half[n * n_trunc + m] += w * psi[n] * psi[m];
                }
            }
        }
        let mut sign = vec![0.0; n_trunc * n_trunc];
        let mut mass = vec![0.0; n_trunc * n_trunc];
        for n in 0..n_trunc {
            for m in 0..n_trunc {
                let i = n * n_trunc + m;
                if (n + m) % 2 == 1 {
                    sign[i] = 2.0 * half[i];
                } else {
                    mass[i] = 2.0 * half[i];
                }
            }
        }
        Self { sign, mass }
    }

    fn rotated(table: &[f64], n_trunc: usize, angle: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); table.len()];
        for n in 0..n_trunc {
            for m in 0..n_trunc {
                let v = table[n * n_trunc + m];
                if v != 0.0 {
                    out[n * n_trunc + m] = Complex64::from_polar(v, -((n as f64) - (m as f64)) * angle);
                }
            }
        }
        out
    }
}

fn sign_correlation_lossless(rho: &FockDensityMatrix, kernels: &HomodyneKernels, theta: f64, phi: f64) -> f64 {
    let n = rho.n_trunc;
    let ka = HomodyneKernels::rotated(&kernels.sign, n, theta);
    let kb = HomodyneKernels::rotated(&kernels.sign, n, phi);
    let mass_a = HomodyneKernels::rotated(&kernels.mass, n, theta);
    let mass_b = HomodyneKernels::rotated(&kernels.mass, n, phi);
    let outside = 1.0 - rho.contract(&mass_a, &mass_b).re;
    if outside > 1e-8 {
        log::warn!("homodyne density mass outside [-8, 8]^2 is {outside:.3e}");
    }
    rho.contract(&ka, &kb).re
}

/// Sign-binned correlation of `x_theta^A` and `x_phi^B` after homodyne loss
/// `eta_bhd` on both modes.
pub fn fock_sign_correlation(rho: &FockDensityMatrix, theta: f64, phi: f64, eta_bhd: f64) -> Result<f64> {
    let lossy = rho.with_loss(eta_bhd)?;
    let kernels = HomodyneKernels::new(rho.n_trunc);
    Ok(sign_correlation_lossless(&lossy, &kernels, theta, phi))
}

/// The four correlators `E(theta_j, phi_k)` after homodyne loss.
pub fn fock_correlators(rho: &FockDensityMatrix, angles: &Angles, eta_bhd: f64) -> Result<[[f64; 2]; 2]> {
    let lossy = rho.with_loss(eta_bhd)?;
    let kernels = HomodyneKernels::new(rho.n_trunc);
    Ok(std::array::from_fn(|j| {
        std::array::from_fn(|k| sign_correlation_lossless(&lossy, &kernels, angles.alice(j), angles.bob(k)))
    }))
}

pub fn fock_chsh(rho: &FockDensityMatrix, angles: &Angles, eta_bhd: f64) -> Result<f64> {
    let e = fock_correlators(rho, angles, eta_bhd)?;
    Ok(e[0][0] + e[0][1] + e[1][0] - e[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockOptimum {
    pub lambda: f64,
    pub product: f64,
    pub s_max: f64,
}

/// Range of `lambda T` scanned by [`fock_optimal_product`].
pub const PRODUCT_SCAN: (f64, f64) = (0.45, 0.68);

/// Maximizes S over the squeezing with ideal detectors and exact
/// single-photon heralding, entirely in the Fock basis.
pub fn fock_optimal_product(transmittance: f64, n_trunc: usize) -> Result<FockOptimum> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(domain(format!(
            "transmittance must lie in (0, 1], got {transmittance}"
        )));
    }
    let angles = Angles::default();
    let s_at = |lambda: f64| {
        single_photon_conditioning(lambda, transmittance, n_trunc)
            .and_then(|(rho, _)| fock_chsh(&rho, &angles, 1.0))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (lo, hi) = (PRODUCT_SCAN.0 / transmittance, (PRODUCT_SCAN.1 / transmittance).min(0.95));
    let grid: Vec<f64> = (0..10).map(|i| lo + (hi - lo) * i as f64 / 9.0).collect();
    let values: Vec<f64> = grid.iter().map(|&l| s_at(l)).collect();
    let best = *local_maxima(&values)
        .iter()
        .max_by(|&&a, &&b| values[a].total_cmp(&values[b]))
        .ok_or_else(|| Error::InvalidRegime("S undefined across the Fock scan".into()))?;
    let (a, b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let (lambda, s_max) = golden_section_max(s_at, a, b, 1e-4);
    Ok(FockOptimum {
        lambda,
        product: lambda * transmittance,
        s_max,
    })
}

/// Monte Carlo double-click frequency: draws the pair number of the source,
/// binomially reflects photons on each arm, and fires each detector with
/// probability `1 - (1 - eta)^k`.
pub fn fock_click_frequency(
    lambda: f64,
    transmittance: f64,
    eta: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(transmittance > 0.0 && transmittance <= 1.0) || !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("transmittance and eta must lie in (0, 1]"));
    }
    let pairs = Geometric::new(1.0 - lambda * lambda).map_err(|e| domain(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut clicks = 0u64;
    for _ in 0..trials {
        let n = pairs.sample(&mut rng);
        if n == 0 {
            continue;
        }
        let reflect = Binomial::new(n, 1.0 - transmittance).map_err(|e| domain(e.to_string()))?;
        let k = reflect.sample(&mut rng);
        let l = reflect.sample(&mut rng);
        let fires = |rng: &mut ChaCha20Rng, photons: u64| {
            photons > 0 && rng.random::<f64>() < 1.0 - (1.0 - eta).powi(photons as i32)
        };
        if fires(&mut rng, k) && fires(&mut rng, l) {
            clicks += 1;
        }
    }
    Ok(clicks as f64 / trials as f64)
}
