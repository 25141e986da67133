//! Parameter sweeps of the optimised Fisher information over the cavity decay
//! rate or the atom number.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::PhysicalParams;
use crate::error::{Error, Result};
use crate::metrology::{SensingCase, SensingScenario};
use crate::optimizer::{anneal, fit_quadratic_gain, Objective, OptimizerConfig};
use crate::pulse::PulseParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa,
    #[serde(alias = "N")]
    N,
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParameter::Kappa => "kappa",
            SweepParameter::N => "N",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(rename = "F_max")]
    pub f_max: Option<f64>,
    pub theta_star: Option<f64>,
    /// Set when the point could not be evaluated.
    pub error: Option<String>,
    /// Pulse that produced `f_max`.
    pub pulse: Option<PulseParams<f64>>,
}

impl SweepPoint {
    fn failed(value: f64, err: Error) -> Self {
        log::warn!("sweep point {value} failed: {err}");
        Self { value, f_max: None, theta_star: None, error: Some(err.to_string()), pulse: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
    /// `a` of `F = N + a N^2`, N sweeps only.
    pub fit_a: Option<f64>,
}

impl SweepResult {
    /// CSV `<param>,F_max,theta_star,status`; failed points keep their row
    /// with empty numbers and the error text as status.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.parameter.to_string().as_str(), "F_max", "theta_star", "status"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            w.write_record([
                p.value.to_string(),
                opt(p.f_max),
                opt(p.theta_star),
                p.error.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn values(&self) -> Vec<(f64, f64)> {
        self.points.iter().filter_map(|p| p.f_max.map(|f| (p.value, f))).collect()
    }
}

fn run_point(
    value: f64,
    scenario: Result<SensingScenario>,
    params: PhysicalParams<f64>,
    config: &OptimizerConfig,
    reuse: Option<&PulseParams<f64>>,
) -> SweepPoint {
    let attempt = || -> Result<SweepPoint> {
        let scenario = scenario?;
        let pulse = match reuse {
            Some(p) => p.clone(),
            None => anneal(&scenario, &params, config)?.best_pulse,
        };
        let e = Objective::new(scenario, params, config.clone())?.evaluate(&pulse)?;
        Ok(SweepPoint {
            value,
            f_max: Some(e.f_max),
            theta_star: Some(e.theta_star),
            error: None,
            pulse: Some(pulse),
        })
    };
    attempt().unwrap_or_else(|e| SweepPoint::failed(value, e))
}

/// `F_max` against the cavity decay rate, re-optimising each point unless a
/// pulse is supplied.
pub fn kappa_sweep(
    scenario: &SensingScenario,
    params: &PhysicalParams<f64>,
    config: &OptimizerConfig,
    kappas: &[f64],
    reuse: Option<&PulseParams<f64>>,
) -> SweepResult {
    let points = kappas
        .par_iter()
        .map(|&kappa| {
            let p = PhysicalParams { kappa, ..params.clone() };
            run_point(kappa, Ok(*scenario), p, config, reuse)
        })
        .collect();
    SweepResult { parameter: SweepParameter::Kappa, points, fit_a: None }
}

/// `F_max` against the atom number with `m = N/2`, plus the `N + a N^2` fit.
pub fn n_sweep(
    case: SensingCase,
    params: &PhysicalParams<f64>,
    config: &OptimizerConfig,
    atom_numbers: &[usize],
    reuse: Option<&PulseParams<f64>>,
) -> SweepResult {
    let points: Vec<SweepPoint> = atom_numbers
        .par_iter()
        .map(|&n| run_point(n as f64, SensingScenario::new(n, n / 2, case), params.clone(), config, reuse))
        .collect();
    let mut result = SweepResult { parameter: SweepParameter::N, points, fit_a: None };
    result.fit_a = fit_quadratic_gain(&result.values());
    result
}
