//! Monte Carlo simulation of the pulsed, event-ready protocol.
//!
//! Events are generated in fixed-size blocks. Block `b` draws from four
//! ChaCha streams `4b + party` (Sophie, Alice, Bob, source) under the run
//! seed, and tallies are integers, so the result is bit-identical for any
//! number of shards.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bell::{chsh_marginals, BellResult, ExperimentParams, QuadratureMarginal};
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;

/// Abort threshold for the rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 0.01;
/// Events per block; also the unit of parallel work.
pub const BLOCK_EVENTS: u64 = 4096;

const ENVELOPE_SCALES: [f64; 9] = [1.05, 1.1, 1.2, 1.35, 1.5, 1.75, 2.0, 2.5, 3.0];
const ENVELOPE_SAFETY: f64 = 1.02;
const ENVELOPE_RADII: usize = 400;
const ENVELOPE_ANGLES: usize = 180;

/// Rejection sampler for a signed-mixture marginal, using an isotropic
/// Gaussian envelope with variance `scale * lambda_max` over all terms.
///
/// The signed weights are of order `1/P` with massive cancellation, so the
/// positive terms alone make a useless envelope. Instead the supremum of
/// `f / g` is located numerically on a polar grid (both are even in `r`) and
/// inflated by a safety factor.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    marginal: QuadratureMarginal,
    sigma: f64,
    bound: f64,
}

fn max_eigenvalue(cov: &Matrix2<f64>) -> f64 {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

impl QuadratureSampler {
    pub fn new(marginal: QuadratureMarginal) -> Result<Self> {
        let lambda_max = marginal
            .terms
            .iter()
            .map(|t| max_eigenvalue(&t.cov))
            .fold(0.0, f64::max);
        let r_max = 12.0 * lambda_max.sqrt();
        let mut samples = Vec::with_capacity(ENVELOPE_RADII * ENVELOPE_ANGLES);
        for i in 0..ENVELOPE_RADII {
            let r = r_max * i as f64 / (ENVELOPE_RADII - 1) as f64;
            for k in 0..ENVELOPE_ANGLES {
                let a = PI * k as f64 / ENVELOPE_ANGLES as f64;
                let f = marginal.density(r * a.cos(), r * a.sin());
                samples.push((r * r, f));
            }
        }
        let mut best: Option<(f64, f64)> = None;
        for s in ENVELOPE_SCALES {
            let var = s * lambda_max;
            let ratio = samples
                .iter()
                .map(|&(r2, f)| f * 2.0 * PI * var * (0.5 * r2 / var).exp())
                .fold(0.0, f64::max);
            let bound = ENVELOPE_SAFETY * ratio;
            if best.is_none_or(|(_, b)| bound < b) {
                best = Some((var, bound));
            }
        }
        let (var, bound) = best.expect("at least one envelope scale");
        if !(bound.is_finite() && bound > 0.0) || 1.0 / bound < MIN_ACCEPTANCE {
            return Err(Error::EnvelopeFailure {
                acceptance: 1.0 / bound,
            });
        }
        Ok(Self {
            marginal,
            sigma: var.sqrt(),
            bound,
        })
    }

    /// Expected fraction of proposals accepted.
    pub fn acceptance(&self) -> f64 {
        1.0 / self.bound
    }

    pub fn marginal(&self) -> &QuadratureMarginal {
        &self.marginal
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let var = self.sigma * self.sigma;
        loop {
            let x = self.sigma * rng.sample::<f64, _>(StandardNormal);
            let y = self.sigma * rng.sample::<f64, _>(StandardNormal);
            let g = (-0.5 * (x * x + y * y) / var).exp() / (2.0 * PI * var);
            let f = self.marginal.density(x, y);
            if f > self.bound * g {
                log::warn!("rejection envelope exceeded at ({x:.3}, {y:.3})");
            }
            if rng.random::<f64>() * self.bound * g < f {
                return (x, y);
            }
        }
    }
}

pub fn sample_joint_quadratures(marginal: &QuadratureMarginal, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let sampler = QuadratureSampler::new(marginal.clone())?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub params: ExperimentParams,
    pub n_target_events: u64,
    pub seed: u64,
    /// Pulses per second.
    pub rep_rate: f64,
    /// Probabilities of choosing the first and second setting, for both parties.
    pub angle_choice_probs: [f64; 2],
    /// Parallel work groups; 0 means one per rayon thread.
    pub shards: usize,
}

impl ProtocolConfig {
    pub fn new(params: ExperimentParams, n_target_events: u64, seed: u64) -> Self {
        Self {
            params,
            n_target_events,
            seed,
            rep_rate: 1e6,
            angle_choice_probs: [0.5, 0.5],
            shards: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_target_events == 0 {
            return Err(domain("n_target_events must be at least 1"));
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(domain(format!("rep_rate must be positive, got {}", self.rep_rate)));
        }
        let [p, q] = self.angle_choice_probs;
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || (p + q - 1.0).abs() > 1e-12 {
            return Err(domain(format!(
                "angle_choice_probs must be probabilities summing to 1, got [{p}, {q}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelatorTally {
    pub events: u64,
    /// Sum of `sign(x_A) sign(x_B)`.
    pub sign_sum: i64,
}

impl CorrelatorTally {
    pub fn estimate(&self) -> Option<f64> {
        (self.events > 0).then(|| self.sign_sum as f64 / self.events as f64)
    }

    fn merge(&mut self, other: &Self) {
        self.events += other.events;
        self.sign_sum += other.sign_sum;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    /// `None` when some angle pair received no events.
    pub s_hat: Option<f64>,
    pub stderr_s: Option<f64>,
    pub correlator_counts: [[CorrelatorTally; 2]; 2],
    pub events: u64,
    pub pulses: u64,
    /// Simulated data-taking time, `pulses / rep_rate`.
    pub wall_sim_time: f64,
    /// Empirical double-click rate per pulse.
    pub p_hat: f64,
}

impl MCResult {
    pub fn events_per_second(&self) -> f64 {
        self.events as f64 / self.wall_sim_time
    }

    pub fn correlators(&self) -> [[Option<f64>; 2]; 2] {
        self.correlator_counts.map(|row| row.map(|t| t.estimate()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockTally {
    counts: [[CorrelatorTally; 2]; 2],
    pulses: u64,
}

impl BlockTally {
    fn merge(mut self, other: Self) -> Self {
        for j in 0..2 {
            for k in 0..2 {
                self.counts[j][k].merge(&other.counts[j][k]);
            }
        }
        self.pulses += other.pulses;
        self
    }
}

fn party_stream(seed: u64, block: u64, party: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(4 * block + party);
    rng
}

fn run_block(
    config: &ProtocolConfig,
    block: u64,
    gap: &Geometric,
    samplers: &[[QuadratureSampler; 2]; 2],
) -> BlockTally {
    let first = block * BLOCK_EVENTS;
    let events = BLOCK_EVENTS.min(config.n_target_events - first);
    let mut sophie = party_stream(config.seed, block, 0);
    let mut alice = party_stream(config.seed, block, 1);
    let mut bob = party_stream(config.seed, block, 2);
    let mut source = party_stream(config.seed, block, 3);
    let p_first = config.angle_choice_probs[0];
    let mut tally = BlockTally::default();
    for _ in 0..events {
        // pulses up to and including the next double click
        tally.pulses += gap.sample(&mut sophie) + 1;
        let j = usize::from(alice.random::<f64>() >= p_first);
        let k = usize::from(bob.random::<f64>() >= p_first);
        let (x, y) = samplers[j][k].sample(&mut source);
        let cell = &mut tally.counts[j][k];
        cell.events += 1;
        cell.sign_sum += if (x >= 0.0) == (y >= 0.0) { 1 } else { -1 };
    }
    tally
}

pub fn run_protocol(config: &ProtocolConfig) -> Result<MCResult> {
    config.validate()?;
    if config.params.lambda <= 0.0 {
        return Err(Error::InvalidRegime(
            "vacuum input (lambda = 0) cannot trigger the photodetectors".into(),
        ));
    }
    let state = config.params.conditional_state()?;
    let p = state.success_prob;
    let gap = Geometric::new(p).map_err(|e| domain(format!("success probability {p}: {e}")))?;
    let marginals = chsh_marginals(&state, &config.params.angles)?;
    let mut samplers = Vec::with_capacity(4);
    for m in marginals.iter().flatten() {
        samplers.push(QuadratureSampler::new(m.clone())?);
    }
    let mut it = samplers.into_iter();
    let samplers: [[QuadratureSampler; 2]; 2] =
        std::array::from_fn(|_| std::array::from_fn(|_| it.next().expect("four samplers")));

    let blocks = config.n_target_events.div_ceil(BLOCK_EVENTS);
    let shards = if config.shards == 0 {
        rayon::current_num_threads()
    } else {
        config.shards
    } as u64;
    let per_shard = blocks.div_ceil(shards.max(1));
    let total = (0..shards)
        .into_par_iter()
        .map(|s| {
            let range = (s * per_shard).min(blocks)..((s + 1) * per_shard).min(blocks);
            range.fold(BlockTally::default(), |acc, b| {
                acc.merge(run_block(config, b, &gap, &samplers))
            })
        })
        .reduce(BlockTally::default, BlockTally::merge);

    let correlators = total.counts.map(|row| row.map(|t| t.estimate()));
    let (s_hat, stderr_s) = match correlators {
        [[Some(a), Some(b)], [Some(c), Some(d)]] => {
            let variance: f64 = total
                .counts
                .iter()
                .flatten()
                .map(|t| {
                    let e = t.estimate().expect("populated");
                    (1.0 - e * e) / t.events as f64
                })
                .sum();
            (Some(a + b + c - d), Some(variance.sqrt()))
        }
        _ => (None, None),
    };
    let wall_sim_time = total.pulses as f64 / config.rep_rate;
    Ok(MCResult {
        s_hat,
        stderr_s,
        correlator_counts: total.counts,
        events: config.n_target_events,
        pulses: total.pulses,
        wall_sim_time,
        p_hat: config.n_target_events as f64 / total.pulses as f64,
    })
}

/// Data-taking time needed for a CHSH standard error `target_stderr`:
/// `(sigma0 / target)^2 / (P rep_rate)` with per-event variance
/// `sigma0^2 = sum_jk (1 - E_jk^2) / (p_j p_k)`.
pub fn acquisition_time(
    success_prob: f64,
    rep_rate: f64,
    target_stderr: f64,
    bell: &BellResult,
    angle_choice_probs: [f64; 2],
) -> Result<f64> {
    if !(success_prob > 0.0 && rep_rate > 0.0 && target_stderr > 0.0) {
        return Err(domain("success probability, rep_rate and target stderr must be positive"));
    }
    if angle_choice_probs.iter().any(|&p| !(p > 0.0)) {
        return Err(domain("every setting must be chosen with positive probability"));
    }
    let mut sigma0_sq = 0.0;
    for j in 0..2 {
        for k in 0..2 {
            let e = bell.correlators[j][k];
            sigma0_sq += (1.0 - e * e) / (angle_choice_probs[j] * angle_choice_probs[k]);
        }
    }
    let events = sigma0_sq / (target_stderr * target_stderr);
    Ok(events / (success_prob * rep_rate))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of samples against the analytic density on a
/// `bins x bins` grid over +-4 sigma plus one overflow cell. Cells expecting
/// fewer than five counts are pooled into one.
pub fn chi_square_gof(samples: &[(f64, f64)], marginal: &QuadratureMarginal, bins: usize) -> Result<GoodnessOfFit> {
    if bins < 2 || samples.is_empty() {
        return Err(domain("need at least 2 bins and one sample"));
    }
    let (sx, sy) = marginal.max_sigma();
    let (hx, hy) = (8.0 * sx / bins as f64, 8.0 * sy / bins as f64);
    let edge = |i: usize, h: f64, s: f64| -4.0 * s + i as f64 * h;
    let mut expected = vec![0.0; bins * bins];
    for i in 0..bins {
        let rx = GaussLegendre::on_interval(8, edge(i, hx, sx), edge(i + 1, hx, sx));
        for k in 0..bins {
            let ry = GaussLegendre::on_interval(8, edge(k, hy, sy), edge(k + 1, hy, sy));
            let mut mass = 0.0;
            for &(x, wx) in rx.points() {
                for &(y, wy) in ry.points() {
                    mass += wx * wy * marginal.density(x, y);
                }
            }
            expected[i * bins + k] = mass;
        }
    }
    let overflow_prob = (1.0 - expected.iter().sum::<f64>()).max(0.0);
    let mut observed = vec![0u64; bins * bins];
    let mut overflow = 0u64;
    for &(x, y) in samples {
        let i = ((x + 4.0 * sx) / hx).floor();
        let k = ((y + 4.0 * sy) / hy).floor();
        if (0.0..bins as f64).contains(&i) && (0.0..bins as f64).contains(&k) {
            observed[i as usize * bins + k as usize] += 1;
        } else {
            overflow += 1;
        }
    }
    let n = samples.len() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_e, mut pooled_o) = (overflow_prob * n, overflow as f64);
    for (e, o) in expected.iter().zip(&observed) {
        let e = e * n;
        if e < 5.0 {
            pooled_e += e;
            pooled_o += *o as f64;
        } else {
            cells.push((e, *o as f64));
        }
    }
    if pooled_e > 0.0 {
        cells.push((pooled_e, pooled_o));
    }
    if cells.len() < 2 {
        return Err(domain("too few populated cells for a chi-square test"));
    }
    let statistic: f64 = cells.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| domain(e.to_string()))?
        .sf(statistic);
    Ok(GoodnessOfFit {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{rotated_marginal, BivariateTerm};

    fn unit_gaussian() -> QuadratureMarginal {
        let t = |weight| BivariateTerm {
            weight,
            cov: Matrix2::identity(),
        };
        QuadratureMarginal {
            terms: [t(1.0), t(0.0), t(0.0), t(0.0)],
        }
    }

    #[test]
    fn unit_gaussian_mean_within_clt_bound() {
        let n = 100_000;
        let s = sample_joint_quadratures(&unit_gaussian(), n, 5).unwrap();
        let mx = s.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let my = s.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(mx.abs() < bound && my.abs() < bound);
    }

    #[test]
    fn samples_are_deterministic() {
        let m = unit_gaussian();
        assert_eq!(
            sample_joint_quadratures(&m, 1000, 9).unwrap(),
            sample_joint_quadratures(&m, 1000, 9).unwrap()
        );
        assert_ne!(
            sample_joint_quadratures(&m, 10, 9).unwrap(),
            sample_joint_quadratures(&m, 10, 10).unwrap()
        );
    }

    #[test]
    fn envelope_acceptance_is_reasonable() {
        let params = ExperimentParams::new(0.6, 0.95, 0.3, 0.95).unwrap();
        let state = params.conditional_state().unwrap();
        for (theta, phi) in [(0.0, -0.785), (1.57, 0.785)] {
            let m = rotated_marginal(&state, theta, phi).unwrap();
            let sampler = QuadratureSampler::new(m).unwrap();
            assert!(sampler.acceptance() > 0.1, "{}", sampler.acceptance());
        }
    }

    #[test]
    fn acquisition_time_scalings() {
        let bell = BellResult::from_correlators([[0.5, 0.5], [0.5, -0.5]], 2.6e-4);
        let t = |p, s| acquisition_time(p, 1e6, s, &bell, [0.5, 0.5]).unwrap();
        assert!((t(2.6e-4, 0.0025) / t(2.6e-4, 0.005) - 4.0).abs() < 1e-12);
        assert!((t(5.2e-4, 0.005) / t(2.6e-4, 0.005) - 0.5).abs() < 1e-12);
        // sigma0^2 = 4 * 0.75 / 0.25 = 12
        assert!((t(1.0, 1.0) - 12.0 / 1e6).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let params = ExperimentParams::new(0.6, 0.95, 0.3, 0.95).unwrap();
        let mut c = ProtocolConfig::new(params, 0, 1);
        assert!(c.validate().is_err());
        c.n_target_events = 10;
        c.angle_choice_probs = [0.7, 0.7];
        assert!(c.validate().is_err());
        c.angle_choice_probs = [1.0, 0.0];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn chi_square_accepts_exact_samples() {
        let s = sample_joint_quadratures(&unit_gaussian(), 50_000, 1).unwrap();
        let fit = chi_square_gof(&s, &unit_gaussian(), 30).unwrap();
        assert!(fit.p_value > 1e-3, "{fit:?}");
        let shifted: Vec<_> = s.iter().map(|&(x, y)| (x + 0.05, y)).collect();
        assert!(chi_square_gof(&shifted, &unit_gaussian(), 30).unwrap().p_value < 1e-3);
    }
}
