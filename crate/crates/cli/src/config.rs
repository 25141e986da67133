//! Run configuration as read from `--config` and the command line.

use std::path::{Path, PathBuf};

use cavity_sense::dynamics::PhysicalParams;
use cavity_sense::metrology::{SensingCase, SensingScenario};
use cavity_sense::optimizer::OptimizerConfig;
use cavity_sense::pulse::PulseParams;
use cavity_sense::sweep::SweepParameter;
use cavity_sense::zeeman::{Cavity, HyperfineLabel, LevelPair};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    /// Propagate the initial product state under the run's pulse.
    #[default]
    Pulse,
    /// Ideal equal-amplitude Dicke state.
    Dicke,
    /// All atoms in `|1>`.
    Classical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// 5S1/2
    #[default]
    Ground,
    /// 5P1/2
    Excited,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisherConfig {
    pub state: StateSource,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self { state: StateSource::Pulse }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    /// Grid values; atom numbers for an `n` sweep.
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { parameter: SweepParameter::Kappa, values: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeemanConfig {
    pub manifold: Manifold,
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
    /// Field step for the sensitivity scan (G).
    pub delta_b: f64,
    /// `[[F, m_F], [F, m_F]]`, upper state first.
    pub pair: [[f64; 2]; 2],
    /// Bracket for the magic-field search; no search when absent.
    pub magic_range: Option<[f64; 2]>,
    pub cavity: Cavity,
}

impl Default for ZeemanConfig {
    fn default() -> Self {
        let q = LevelPair::qubit();
        Self {
            manifold: Manifold::Ground,
            b_min: 0.0,
            b_max: 1000.0,
            b_step: 5.0,
            delta_b: 1e-3,
            pair: [[q.upper.f(), q.upper.m_f()], [q.lower.f(), q.lower.m_f()]],
            magic_range: Some([500.0, 800.0]),
            cavity: Cavity { length_m: 1e-3, mirror_radius_m: 10e-3 },
        }
    }
}

impl ZeemanConfig {
    pub fn level_pair(&self) -> LevelPair {
        LevelPair::new(HyperfineLabel::new(self.pair[0][0], self.pair[0][1]), HyperfineLabel::new(self.pair[1][0], self.pair[1][1]))
    }

    pub fn fields(&self) -> Vec<f64> {
        let n = ((self.b_max - self.b_min) / self.b_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.b_min + self.b_step * k as f64).collect()
    }
}

fn default_scenario() -> SensingScenario {
    SensingScenario { n_atoms: 2, excitations: 1, case: SensingCase::CommonField }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: SensingScenario,
    pub physical: PhysicalParams<f64>,
    pub optimizer: OptimizerConfig,
    /// Stored pulse to evaluate instead of optimising.
    #[serde(skip_serializing)]
    pub pulse_file: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub rng_seed: u64,
    pub fisher: FisherConfig,
    pub sweep: SweepConfig,
    pub zeeman: ZeemanConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: default_scenario(),
            physical: PhysicalParams::default(),
            optimizer: OptimizerConfig::default(),
            pulse_file: None,
            output_dir: None,
            rng_seed: 0,
            fisher: FisherConfig::default(),
            sweep: SweepConfig::default(),
            zeeman: ZeemanConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: cavity_sense::Error| CliError::Config(e.to_string());
        self.scenario.validate().map_err(cfg)?;
        self.physical.validate().map_err(cfg)?;
        self.optimizer.validate().map_err(cfg)?;
        let z = &self.zeeman;
        if !(z.b_min >= 0.0 && z.b_max >= z.b_min && z.b_step > 0.0 && z.delta_b >= 0.0) {
            return Err(CliError::Config("zeeman field grid needs 0 <= b_min <= b_max, b_step > 0, delta_b >= 0".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        if self.sweep.parameter == SweepParameter::N
            && self.sweep.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0)
        {
            return Err(CliError::Config("atom numbers in an N sweep must be positive integers".into()));
        }
        if self.sweep.parameter == SweepParameter::Kappa && self.sweep.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(CliError::Config("kappa values must be non-negative".into()));
        }
        Ok(())
    }

    pub fn load_pulse(&self) -> Result<Option<PulseParams<f64>>, CliError> {
        let Some(path) = &self.pulse_file else { return Ok(None) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let p = PulseParams::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        p.validate(self.optimizer.omega_max()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Some(p))
    }
}
