//! TOML run configuration shared by all subcommands.
//!
//! ```toml
//! [params]
//! lambda = 0.6
//! transmittance = 0.95
//! eta = 0.3
//! eta_bhd = 0.95
//!
//! [sweep]
//! axis = "eta_bhd"
//! min = 0.8
//! max = 1.0
//! steps = 41
//!
//! [mc]
//! n_target_events = 1000000
//! seed = 7
//!
//! [output]
//! path = "out.csv"
//! format = "csv"
//! ```
//!
//! Every section is optional; a subcommand only complains about the fields it
//! actually needs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bell::{Angles, ExperimentParams, SweepAxis};
use crate::error::{Error, Result};
use crate::fock::DEFAULT_TRUNCATION;
use crate::mc::ProtocolConfig;
use crate::output::Format;

fn missing(field: &str) -> Error {
    Error::Config(format!("missing required field `{field}`"))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmittance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_bhd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Angles>,
    /// Fock truncation for the oracle checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
}

/// A uniform grid `min, ..., max` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(invalid(format!("{name}: need min < max, got {} and {}", self.min, self.max)));
        }
        if self.steps < 2 {
            return Err(invalid(format!("{name}: steps must be at least 2, got {}", self.steps)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepSection {
    pub fn grid(&self) -> Grid {
        Grid::new(self.min, self.max, self.steps)
    }
}

/// Grids for the four panels; defaults follow the published figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Section {
    pub transmittances: Vec<f64>,
    /// `lambda T` for panels c and d.
    pub product: f64,
    pub wigner_lambda: f64,
    pub wigner_transmittance: f64,
    pub wigner_eta: f64,
    pub wigner_offsets: Grid,
    pub lambda: Grid,
    pub eta: Grid,
    /// APD efficiency held fixed in panel d.
    pub eta_fixed: f64,
    pub eta_bhd: Grid,
}

impl Default for Fig2Section {
    fn default() -> Self {
        Self {
            transmittances: vec![0.9, 0.95, 0.99],
            product: 0.57,
            wigner_lambda: 0.5,
            wigner_transmittance: 0.95,
            wigner_eta: 0.3,
            wigner_offsets: Grid::new(-3.0, 3.0, 121),
            lambda: Grid::new(0.02, 0.9, 45),
            eta: Grid::new(0.05, 1.0, 20),
            eta_fixed: 0.3,
            eta_bhd: Grid::new(0.8, 1.0, 41),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_target_events: u64,
    pub seed: u64,
    pub rep_rate: f64,
    pub angle_choice_probs: [f64; 2],
    /// 0 means one shard per worker thread.
    pub shards: usize,
    /// Target CHSH standard error for the acquisition-time projection.
    pub target_stderr: f64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_target_events: 1_000_000,
            seed: 1,
            rep_rate: 1e6,
            angle_choice_probs: [0.5, 0.5],
            shards: 0,
            target_stderr: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Random parameter draws compared across the three routes.
    pub draws: usize,
    pub seed: u64,
    /// Monte Carlo samples per draw.
    pub mc_samples: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            draws: 10,
            seed: 2024,
            mc_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fig2: Fig2Section,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    /// Structural checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        if let Some(sweep) = &self.sweep {
            sweep.grid().validate("sweep")?;
        }
        let f = &self.fig2;
        if f.transmittances.is_empty() {
            return Err(invalid("fig2.transmittances must not be empty"));
        }
        f.wigner_offsets.validate("fig2.wigner_offsets")?;
        f.lambda.validate("fig2.lambda")?;
        f.eta.validate("fig2.eta")?;
        f.eta_bhd.validate("fig2.eta_bhd")?;
        if self.mc.n_target_events == 0 {
            return Err(invalid("mc.n_target_events must be at least 1"));
        }
        if self.params.n_trunc.is_some_and(|n| n < crate::fock::MIN_TRUNCATION) {
            return Err(invalid(format!(
                "params.n_trunc must be at least {}",
                crate::fock::MIN_TRUNCATION
            )));
        }
        Ok(())
    }

    /// All four physical parameters are required.
    pub fn experiment_params(&self) -> Result<ExperimentParams> {
        let p = &self.params;
        let params = ExperimentParams::new(
            p.lambda.ok_or_else(|| missing("params.lambda"))?,
            p.transmittance.ok_or_else(|| missing("params.transmittance"))?,
            p.eta.ok_or_else(|| missing("params.eta"))?,
            p.eta_bhd.ok_or_else(|| missing("params.eta_bhd"))?,
        )?;
        Ok(params.with_angles(p.angles.unwrap_or_default()))
    }

    /// The squeezing is the free variable; detector efficiencies default to 1.
    pub fn optimize_inputs(&self) -> Result<(f64, f64, f64, Angles)> {
        let p = &self.params;
        Ok((
            p.transmittance.ok_or_else(|| missing("params.transmittance"))?,
            p.eta.unwrap_or(1.0),
            p.eta_bhd.unwrap_or(1.0),
            p.angles.unwrap_or_default(),
        ))
    }

    /// Parameters for a sweep: the swept field may be omitted from `[params]`.
    pub fn sweep_inputs(&self) -> Result<(SweepSection, ExperimentParams)> {
        let sweep = self.sweep.clone().ok_or_else(|| missing("sweep"))?;
        let mut p = self.params.clone();
        let placeholder = Some(sweep.min);
        match sweep.axis {
            SweepAxis::Lambda => p.lambda = p.lambda.or(placeholder),
            SweepAxis::Eta => p.eta = p.eta.or(placeholder),
            SweepAxis::EtaBhd => p.eta_bhd = p.eta_bhd.or(placeholder),
        }
        let fixed = RunConfig { params: p, ..Default::default() }.experiment_params()?;
        Ok((sweep, fixed))
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        let m = &self.mc;
        let config = ProtocolConfig {
            params: self.experiment_params()?,
            n_target_events: m.n_target_events,
            seed: m.seed,
            rep_rate: m.rep_rate,
            angle_choice_probs: m.angle_choice_probs,
            shards: m.shards,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn n_trunc(&self) -> usize {
        self.params.n_trunc.unwrap_or(DEFAULT_TRUNCATION)
    }
}
