//! Covariance-matrix algebra for the four-mode heralding setup.
//!
//! Quadratures are ordered `(x_A, p_A, x_B, p_B, x_C, p_C, x_D, p_D)` and
//! normalized so that the vacuum covariance is the identity, i.e.
//! `gamma_ij = <r_i r_j + r_j r_i> - 2 <r_i><r_j>` with `[x, p] = i`.
//! Modes A and B go to the homodyne detectors, C and D to the on/off
//! photodetectors.

use nalgebra::{DMatrix, Matrix4};

use crate::error::{domain, Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
    C,
    D,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::B => 1,
            Mode::C => 2,
            Mode::D => 3,
        }
    }
}

/// The two beam splitters that tap light from the signal modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModePair {
    /// BS_A: signal A with ancilla C.
    AC,
    /// BS_B: signal B with ancilla D.
    BD,
}

impl ModePair {
    pub fn modes(self) -> (Mode, Mode) {
        match self {
            ModePair::AC => (Mode::A, Mode::C),
            ModePair::BD => (Mode::B, Mode::D),
        }
    }
}

/// Sign of the reflected amplitude in the beam-splitter matrix. Physical
/// observables do not depend on it; `Flipped` exists to test that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamSplitterSign {
    #[default]
    Standard,
    Flipped,
}

/// Block-diagonal symplectic form with `[[0, 1], [-1, 0]]` per mode.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Real symmetric second-moment matrix of an `N`-mode zero-mean state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(domain(format!(
                "covariance matrix must be square with even positive dimension, got {rows}x{cols}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(domain("covariance matrix has non-finite entries"));
        }
        let scale = entries.amax().max(1.0);
        if max_asymmetry(&entries) > SYMMETRY_TOL * scale {
            return Err(domain("covariance matrix is not symmetric"));
        }
        Ok(Self { entries })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            entries: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn modes(&self) -> usize {
        self.dim() / 2
    }

    /// 2x2 covariance of a single mode.
    pub fn reduced(&self, mode: Mode) -> Result<nalgebra::Matrix2<f64>> {
        let k = mode.index();
        if k >= self.modes() {
            return Err(domain(format!("mode {mode:?} not present")));
        }
        Ok(self.entries.fixed_view::<2, 2>(2 * k, 2 * k).into_owned())
    }

    /// Symplectic eigenvalues in ascending order. For a positive-definite
    /// `gamma` these are the singular values of `gamma^1/2 Omega gamma^1/2`,
    /// each of which appears twice.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = self.entries.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(domain("covariance matrix is not positive definite"));
        }
        let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_vals)
            * eig.eigenvectors.transpose();
        let m = &root * symplectic_form(self.modes()) * &root;
        let mut squares: Vec<f64> = (m.transpose() * &m)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        squares.sort_by(f64::total_cmp);
        Ok(squares
            .chunks(2)
            .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
            .collect())
    }

    /// Checks the uncertainty principle `gamma + i Omega >= 0` through the
    /// smallest symplectic eigenvalue.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues()
            .map(|nu| nu.iter().all(|&v| v >= 1.0 - tol))
            .unwrap_or(false)
    }
}

/// Linear map preserving the symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    entries: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows % 2 != 0 {
            return Err(domain("symplectic matrix must be square with even dimension"));
        }
        let omega = symplectic_form(rows / 2);
        let defect = (&entries * &omega * entries.transpose() - &omega).amax();
        if defect > SYMMETRY_TOL {
            return Err(domain(format!(
                "matrix violates the symplectic condition by {defect:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, gamma: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        if gamma.dim() != self.entries.nrows() {
            return Err(domain(format!(
                "dimension mismatch: symplectic {} vs covariance {}",
                self.entries.nrows(),
                gamma.dim()
            )));
        }
        let out = &self.entries * gamma.matrix() * self.entries.transpose();
        CovarianceMatrix::new(symmetrize(out))
    }
}

/// Gaussian completely positive map `gamma -> X gamma X^T + G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    linear_part: DMatrix<f64>,
    noise_part: DMatrix<f64>,
}

impl GaussianChannel {
    pub fn new(linear_part: DMatrix<f64>, noise_part: DMatrix<f64>) -> Result<Self> {
        if linear_part.shape() != noise_part.shape() || !linear_part.is_square() {
            return Err(domain("channel parts must be square and of equal size"));
        }
        if max_asymmetry(&noise_part) > SYMMETRY_TOL {
            return Err(domain("channel noise matrix is not symmetric"));
        }
        let min_eig = noise_part
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .min();
        if min_eig < -SYMMETRY_TOL {
            return Err(domain(format!(
                "channel noise matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self {
            linear_part,
            noise_part,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            linear_part: DMatrix::identity(dim, dim),
            noise_part: DMatrix::zeros(dim, dim),
        }
    }

    pub fn linear_part(&self) -> &DMatrix<f64> {
        &self.linear_part
    }

    pub fn noise_part(&self) -> &DMatrix<f64> {
        &self.noise_part
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain(format!("squeezing lambda must lie in [0, 1), got {lambda}")));
    }
    Ok(())
}

fn check_efficiency(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(domain(format!("{name} must lie in (0, 1], got {value}")));
    }
    Ok(())
}

/// Two-mode squeezed vacuum `sqrt(1 - l^2) sum_n l^n |n, n>` on modes A, B.
pub fn tmsv_covariance(lambda: f64) -> Result<CovarianceMatrix> {
    check_lambda(lambda)?;
    let l2 = lambda * lambda;
    // cosh(2r) and sinh(2r) with r = atanh(lambda).
    let c = (1.0 + l2) / (1.0 - l2);
    let s = 2.0 * lambda / (1.0 - l2);
    let mut m = DMatrix::zeros(4, 4);
    for k in 0..4 {
        m[(k, k)] = c;
    }
    m[(0, 2)] = s;
    m[(2, 0)] = s;
    m[(1, 3)] = -s;
    m[(3, 1)] = -s;
    CovarianceMatrix::new(m)
}

/// `gamma_AB (+) I_CD`.
pub fn embed_with_vacuum_ancillas(gamma_ab: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if gamma_ab.dim() != 4 {
        return Err(domain(format!(
            "expected a 4x4 two-mode covariance, got {}x{}",
            gamma_ab.dim(),
            gamma_ab.dim()
        )));
    }
    let mut m = DMatrix::identity(8, 8);
    m.view_mut((0, 0), (4, 4)).copy_from(gamma_ab.matrix());
    CovarianceMatrix::new(m)
}

pub fn beamsplitter_symplectic(transmittance: f64, pair: ModePair) -> Result<SymplecticMatrix> {
    beamsplitter_symplectic_with(transmittance, pair, BeamSplitterSign::Standard)
}

/// Beam splitter acting as `x' = sqrt(T) x + sqrt(1-T) x_anc`,
/// `x_anc' = -sqrt(1-T) x + sqrt(T) x_anc` on both quadratures of `pair`.
pub fn beamsplitter_symplectic_with(
    transmittance: f64,
    pair: ModePair,
    sign: BeamSplitterSign,
) -> Result<SymplecticMatrix> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(domain(format!(
            "transmittance must lie in (0, 1], got {transmittance}"
        )));
    }
    let t = transmittance.sqrt();
    let r = match sign {
        BeamSplitterSign::Standard => (1.0 - transmittance).sqrt(),
        BeamSplitterSign::Flipped => -(1.0 - transmittance).sqrt(),
    };
    let (signal, ancilla) = pair.modes();
    let (s, a) = (2 * signal.index(), 2 * ancilla.index());
    let mut m = DMatrix::identity(8, 8);
    for q in 0..2 {
        m[(s + q, s + q)] = t;
        m[(s + q, a + q)] = r;
        m[(a + q, s + q)] = -r;
        m[(a + q, a + q)] = t;
    }
    SymplecticMatrix::new(m)
}

/// Homodyne loss on A, B and photodetector loss on C, D as a single channel.
pub fn detector_loss_channel(eta_bhd: f64, eta: f64) -> Result<GaussianChannel> {
    check_efficiency("homodyne efficiency", eta_bhd)?;
    check_efficiency("photodetector efficiency", eta)?;
    let mut x = DMatrix::zeros(8, 8);
    let mut g = DMatrix::zeros(8, 8);
    for k in 0..8 {
        let e = if k < 4 { eta_bhd } else { eta };
        x[(k, k)] = e.sqrt();
        g[(k, k)] = 1.0 - e;
    }
    GaussianChannel::new(x, g)
}

pub fn apply_channel(gamma: &CovarianceMatrix, channel: &GaussianChannel) -> Result<CovarianceMatrix> {
    if gamma.dim() != channel.linear_part.nrows() {
        return Err(domain(format!(
            "dimension mismatch: channel {} vs covariance {}",
            channel.linear_part.nrows(),
            gamma.dim()
        )));
    }
    let out = &channel.linear_part * gamma.matrix() * channel.linear_part.transpose()
        + &channel.noise_part;
    CovarianceMatrix::new(symmetrize(out))
}

/// Full heralding pipeline: TMSV, vacuum ancillas, both tap beam splitters,
/// then detector losses.
pub fn output_covariance(
    lambda: f64,
    transmittance: f64,
    eta: f64,
    eta_bhd: f64,
) -> Result<CovarianceMatrix> {
    output_covariance_with(lambda, transmittance, eta, eta_bhd, BeamSplitterSign::Standard)
}

pub fn output_covariance_with(
    lambda: f64,
    transmittance: f64,
    eta: f64,
    eta_bhd: f64,
    sign: BeamSplitterSign,
) -> Result<CovarianceMatrix> {
    let gamma_in = embed_with_vacuum_ancillas(&tmsv_covariance(lambda)?)?;
    let bs_a = beamsplitter_symplectic_with(transmittance, ModePair::AC, sign)?;
    let bs_b = beamsplitter_symplectic_with(transmittance, ModePair::BD, sign)?;
    let mixed = bs_b.apply(&bs_a.apply(&gamma_in)?)?;
    apply_channel(&mixed, &detector_loss_channel(eta_bhd, eta)?)
}

/// Blocks of `gamma_out^-1 = [[Gamma_AB, sigma], [sigma^T, Gamma_CD]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseBlocks {
    pub gamma_ab: Matrix4<f64>,
    pub sigma: Matrix4<f64>,
    pub gamma_cd: Matrix4<f64>,
}

impl InverseBlocks {
    pub fn assemble(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(8, 8);
        m.view_mut((0, 0), (4, 4)).copy_from(&self.gamma_ab);
        m.view_mut((0, 4), (4, 4)).copy_from(&self.sigma);
        m.view_mut((4, 0), (4, 4)).copy_from(&self.sigma.transpose());
        m.view_mut((4, 4), (4, 4)).copy_from(&self.gamma_cd);
        m
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, refusing
/// matrices whose condition number exceeds [`MAX_CONDITION`].
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular {
            context: context.to_string(),
            condition,
        });
    }
    let chol = m.clone().cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition,
    })?;
    Ok(symmetrize(chol.inverse()))
}

pub fn block_inverse_decompose(gamma_out: &CovarianceMatrix) -> Result<InverseBlocks> {
    if gamma_out.dim() != 8 {
        return Err(domain("block decomposition needs the 8x8 four-mode covariance"));
    }
    let inv = spd_inverse(gamma_out.matrix(), "output covariance")?;
    Ok(InverseBlocks {
        gamma_ab: inv.fixed_view::<4, 4>(0, 0).into_owned(),
        sigma: inv.fixed_view::<4, 4>(0, 4).into_owned(),
        gamma_cd: inv.fixed_view::<4, 4>(4, 4).into_owned(),
    })
}

pub fn lambda_to_r(lambda: f64) -> f64 {
    lambda.atanh()
}

pub fn r_to_lambda(r: f64) -> f64 {
    r.tanh()
}

/// Squeezing in dB, `-10 log10(e^{-2r})`.
pub fn lambda_to_db(lambda: f64) -> f64 {
    20.0 * lambda_to_r(lambda) / std::f64::consts::LN_10
}

pub fn db_to_lambda(db: f64) -> f64 {
    r_to_lambda(db * std::f64::consts::LN_10 / 20.0)
}
