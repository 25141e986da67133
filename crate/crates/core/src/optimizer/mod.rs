//! Pulse optimisation: the Fisher-information objective and multi-start
//! generalized simulated annealing over the pulse parameters.

mod gsa;

pub use gsa::{anneal_box, compass_search, reflect_unit, visiting_temperature, AnnealOutcome, AnnealRecord, GsaSettings, PolishOutcome};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{zero_spurious_coherences, Addressing, DensityMatrix, PhysicalParams, Propagator};
use crate::error::{Error, Result};
use crate::hilbert::{build_full_basis, build_truncated_basis, Basis};
use crate::metrology::{fisher_max, reduce_to_qubits, SensingScenario};
use crate::pulse::{digitize, PulseParams, DEFAULT_KNOTS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    /// Five-family excitation truncation (falls back to full when `m` is 0 or N).
    #[default]
    Truncated,
    /// Every product state with at most one photon.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Bounds on the total pulse time (us).
    pub time_bounds: [f64; 2],
    /// Bounds on the amplitude knots (MHz); the upper bound is also the
    /// digitisation full scale.
    pub amplitude_bounds: [f64; 2],
    pub phase_bounds: [f64; 2],
    pub knots: usize,
    pub qv: f64,
    pub qa: f64,
    pub initial_temperature: f64,
    pub max_iterations: usize,
    pub restart_ratio: f64,
    /// Coordinate-search evaluations spent refining each chain's best point.
    pub polish_evaluations: usize,
    /// Initial polish step as a fraction of each parameter range.
    pub polish_step: f64,
    pub noise_realizations: usize,
    pub rng_seed: u64,
    /// Independent annealing chains; the best result wins.
    pub chains: usize,
    pub basis: BasisChoice,
    /// Optional starting point for every chain.
    pub initial_pulse: Option<PulseParams<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let g = GsaSettings::default();
        Self {
            time_bounds: [5.0, 80.0],
            amplitude_bounds: [0.0, 1.0],
            phase_bounds: [0.0, std::f64::consts::TAU],
            knots: DEFAULT_KNOTS,
            qv: g.qv,
            qa: g.qa,
            initial_temperature: g.initial_temperature,
            max_iterations: g.max_iterations,
            restart_ratio: g.restart_ratio,
            polish_evaluations: 0,
            polish_step: 0.25,
            noise_realizations: 8,
            rng_seed: 0,
            chains: 4,
            basis: BasisChoice::Truncated,
            initial_pulse: None,
        }
    }
}

impl OptimizerConfig {
    pub fn omega_max(&self) -> f64 {
        self.amplitude_bounds[1]
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |b: [f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] <= b[1];
        if !ordered(self.time_bounds) || self.time_bounds[0] <= 0.0 {
            return Err(Error::InvalidArgument(format!("time bounds {:?} must be positive and ordered", self.time_bounds)));
        }
        if !ordered(self.amplitude_bounds) || self.amplitude_bounds[0] < 0.0 || self.amplitude_bounds[1] <= 0.0 {
            return Err(Error::InvalidArgument(format!("amplitude bounds {:?} invalid", self.amplitude_bounds)));
        }
        let tau = std::f64::consts::TAU;
        if !ordered(self.phase_bounds) || self.phase_bounds[0] < 0.0 || self.phase_bounds[1] > tau {
            return Err(Error::InvalidArgument(format!("phase bounds {:?} must lie in [0, 2pi]", self.phase_bounds)));
        }
        if self.knots < 2 {
            return Err(Error::InvalidArgument("at least two knots are required".into()));
        }
        if !(self.qv > 1.0 && self.qv < 3.0) {
            return Err(Error::InvalidArgument(format!("qv must lie in (1, 3), got {}", self.qv)));
        }
        if !(self.qa < 1.0) {
            return Err(Error::InvalidArgument(format!("qa must be below 1, got {}", self.qa)));
        }
        if !(self.initial_temperature > 0.0) {
            return Err(Error::InvalidArgument("initial temperature must be positive".into()));
        }
        if !(self.polish_step > 0.0 && self.polish_step <= 1.0) {
            return Err(Error::InvalidArgument(format!("polish step must lie in (0, 1], got {}", self.polish_step)));
        }
        if self.chains == 0 {
            return Err(Error::InvalidArgument("at least one chain is required".into()));
        }
        if let Some(p) = &self.initial_pulse {
            if p.knots() != self.knots {
                return Err(Error::InvalidArgument(format!(
                    "initial pulse has {} knots, config expects {}",
                    p.knots(),
                    self.knots
                )));
            }
        }
        Ok(())
    }

    pub fn gsa_settings(&self) -> GsaSettings {
        GsaSettings {
            qv: self.qv,
            qa: self.qa,
            initial_temperature: self.initial_temperature,
            max_iterations: self.max_iterations,
            restart_ratio: self.restart_ratio,
        }
    }

    /// Lower and upper bounds of the flattened `[T, omega1.., omega2.., phi..]` vector.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.knots;
        let mut lo = vec![self.time_bounds[0]];
        let mut hi = vec![self.time_bounds[1]];
        for b in [self.amplitude_bounds, self.amplitude_bounds, self.phase_bounds] {
            lo.extend(std::iter::repeat_n(b[0], k));
            hi.extend(std::iter::repeat_n(b[1], k));
        }
        (lo, hi)
    }
}

/// Outcome of one objective evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(rename = "F_max")]
    pub f_max: f64,
    pub theta_star: f64,
    pub discarded_population: f64,
}

/// Fisher information reached by a pulse, with the basis and propagator cached.
#[derive(Debug)]
pub struct Objective {
    scenario: SensingScenario,
    config: OptimizerConfig,
    basis: Basis,
    params: PhysicalParams<f64>,
    addressing: Addressing,
}

impl Objective {
    pub fn new(scenario: SensingScenario, params: PhysicalParams<f64>, config: OptimizerConfig) -> Result<Self> {
        scenario.validate()?;
        params.validate()?;
        config.validate()?;
        let (n, m) = (scenario.n_atoms, scenario.excitations);
        let basis = match config.basis {
            BasisChoice::Truncated if m >= 1 && m < n => build_truncated_basis(n, m)?,
            _ => build_full_basis(n, 1)?,
        };
        Ok(Self { scenario, config, basis, params, addressing: Addressing::halves(n) })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn scenario(&self) -> &SensingScenario {
        &self.scenario
    }

    /// `|0^(N-m) 1^m> (x) |0_c>`
    pub fn initial_state(&self) -> DensityMatrix<f64> {
        let i = self.basis.localized_state(self.scenario.excitations).expect("initial state lies in every basis");
        DensityMatrix::pure(self.basis.dim(), i)
    }

    /// Noise-averaged final state before coherence zeroing.
    pub fn final_state(&self, pulse: &PulseParams<f64>) -> Result<DensityMatrix<f64>> {
        let digital = digitize(pulse, self.config.omega_max())?;
        let prop = Propagator::new(&self.basis, &self.params, &self.addressing)?;
        prop.propagate_averaged(&self.initial_state(), &digital, self.config.rng_seed, self.config.noise_realizations)
    }

    pub fn evaluate(&self, pulse: &PulseParams<f64>) -> Result<Evaluation> {
        let rho = self.final_state(pulse)?;
        let rho = zero_spurious_coherences(&rho, &self.basis, self.scenario.excitations);
        let q = reduce_to_qubits(&rho, &self.basis)?;
        let (theta_star, f_max) = fisher_max(&q, &self.scenario)?;
        Ok(Evaluation { f_max, theta_star, discarded_population: q.discarded_population() })
    }

    /// `F_max`, or 0 if the pulse could not be evaluated.
    pub fn value(&self, pulse: &PulseParams<f64>) -> f64 {
        match self.evaluate(pulse) {
            Ok(e) => e.f_max,
            Err(err) => {
                log::warn!("objective evaluation failed ({err}); scoring 0");
                0.0
            }
        }
    }

    fn value_of_vector(&self, x: &[f64]) -> f64 {
        match PulseParams::from_vector(x) {
            Ok(p) => self.value(&p),
            Err(err) => {
                log::warn!("malformed parameter vector ({err}); scoring 0");
                0.0
            }
        }
    }
}

pub fn objective(
    pulse: &PulseParams<f64>,
    scenario: &SensingScenario,
    params: &PhysicalParams<f64>,
    config: &OptimizerConfig,
) -> Result<f64> {
    Ok(Objective::new(*scenario, params.clone(), config.clone())?.value(pulse))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub chain: usize,
    pub iteration: usize,
    pub best: f64,
    pub accepted: f64,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub best_chain: usize,
    pub best_pulse: PulseParams<f64>,
    #[serde(rename = "F_max")]
    pub f_max: f64,
}

impl OptimizationTrace {
    /// Records of one chain in iteration order.
    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.chain == chain)
    }

    /// CSV with header `chain,iteration,best_F,accepted_F,temperature`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["chain", "iteration", "best_F", "accepted_F", "temperature"])?;
        for r in &self.records {
            w.write_record([
                r.chain.to_string(),
                r.iteration.to_string(),
                r.best.to_string(),
                r.accepted.to_string(),
                r.temperature.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `config.chains` independent annealing chains (in parallel on the
/// current rayon pool), polishes each chain's best point, and keeps the best
/// pulse. Polish records follow the annealing ones with temperature 0.
pub fn anneal(
    scenario: &SensingScenario,
    params: &PhysicalParams<f64>,
    config: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    let obj = Objective::new(*scenario, params.clone(), config.clone())?;
    let (lo, hi) = config.bounds();
    let settings = config.gsa_settings();
    let start = config.initial_pulse.as_ref().map(|p| p.to_vector());
    let outcomes: Vec<AnnealOutcome> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(c as u64);
            let f = |x: &[f64]| obj.value_of_vector(x);
            let mut out = anneal_box(f, &lo, &hi, start.as_deref(), &settings, &mut rng);
            if config.polish_evaluations > 0 {
                let p = compass_search(f, &lo, &hi, &out.best_x, out.best_value, config.polish_evaluations, config.polish_step);
                let offset = out.records.len();
                out.records.extend(p.history.iter().enumerate().map(|(i, &best)| AnnealRecord {
                    iteration: offset + i,
                    best,
                    accepted: best,
                    temperature: 0.0,
                }));
                out.best_x = p.best_x;
                out.best_value = p.best_value;
            }
            out
        })
        .collect();

    let mut best_chain = 0;
    for (c, o) in outcomes.iter().enumerate() {
        if o.best_value > outcomes[best_chain].best_value {
            best_chain = c;
        }
    }
    let records = outcomes
        .iter()
        .enumerate()
        .flat_map(|(c, o)| {
            o.records.iter().map(move |r| TraceRecord {
                chain: c,
                iteration: r.iteration,
                best: r.best,
                accepted: r.accepted,
                temperature: r.temperature,
            })
        })
        .collect();
    let best = &outcomes[best_chain];
    Ok(OptimizationTrace {
        records,
        best_chain,
        best_pulse: PulseParams::from_vector(&best.best_x)?,
        f_max: best.best_value,
    })
}

/// Least-squares `a` in `F = N + a N^2`.
pub fn fit_quadratic_gain(points: &[(f64, f64)]) -> Option<f64> {
    let den: f64 = points.iter().map(|(n, _)| n.powi(4)).sum();
    if points.len() < 2 || den == 0.0 {
        return None;
    }
    let num: f64 = points.iter().map(|(n, f)| (f - n) * n * n).sum();
    Some(num / den)
}
