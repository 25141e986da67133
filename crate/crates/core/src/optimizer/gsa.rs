//! Generalized simulated annealing (Tsallis visiting and acceptance
//! distributions) on a box, maximising a scalar objective.
//!
//! Moves are made in coordinates normalised to `[0, 1]`; proposals leaving the
//! box are reflected back in.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsaSettings {
    pub qv: f64,
    pub qa: f64,
    pub initial_temperature: f64,
    pub max_iterations: usize,
    /// Restart from a random point once the visiting temperature falls below
    /// this fraction of the initial one.
    pub restart_ratio: f64,
}

impl Default for GsaSettings {
    fn default() -> Self {
        Self { qv: 2.62, qa: -5.0, initial_temperature: 5230.0, max_iterations: 2000, restart_ratio: 2e-5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealRecord {
    pub iteration: usize,
    pub best: f64,
    pub accepted: f64,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealOutcome {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub initial_x: Vec<f64>,
    pub records: Vec<AnnealRecord>,
}

/// Visiting temperature after `k` moves since the last restart.
pub fn visiting_temperature(t0: f64, qv: f64, k: usize) -> f64 {
    let s = k as f64 + 2.0;
    t0 * ((qv - 1.0) * 2f64.ln()).exp_m1() / ((qv - 1.0) * s.ln()).exp_m1()
}

/// Draws one step from the Tsallis visiting distribution at temperature `t`.
fn visit_step(rng: &mut ChaCha8Rng, qv: f64, t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let f1 = (t.ln() / (qv - 1.0)).exp();
    let f2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
    let f3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
    let f4 = pi.sqrt() * f1 * f2 / (f3 * (3.0 - qv));
    let f5 = 1.0 / (qv - 1.0) - 0.5;
    let d1 = 2.0 - f5;
    let f6 = pi * (1.0 - f5) / (pi * (1.0 - f5)).sin() / ln_gamma(d1).exp();
    let sigma = (-(qv - 1.0) * (f6 / f4).ln() / (3.0 - qv)).exp();
    let x: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    let y: f64 = rng.sample(StandardNormal);
    let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
    let step = x / den;
    if step.is_finite() {
        step.clamp(-1e8, 1e8)
    } else {
        0.0
    }
}

/// Folds `u` into `[0, 1]` by mirror reflection at the edges.
pub fn reflect_unit(u: f64) -> f64 {
    if !u.is_finite() {
        return 0.5;
    }
    let v = u.rem_euclid(2.0);
    if v > 1.0 {
        2.0 - v
    } else {
        v
    }
}

/// Maximises `f` over the box `[lower, upper]`.
///
/// Each iteration makes one proposal, alternating a move of the full vector
/// with a move of a single coordinate (cycled), so `max_iterations` equals the
/// number of objective evaluations after the initial one.
pub fn anneal_box<F>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    start: Option<&[f64]>,
    settings: &GsaSettings,
    rng: &mut ChaCha8Rng,
) -> AnnealOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let dim = lower.len();
    assert_eq!(upper.len(), dim, "bounds must have equal length");
    let span: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let to_x = |u: &[f64]| -> Vec<f64> { u.iter().enumerate().map(|(i, v)| lower[i] + v * span[i]).collect() };
    let to_u = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if span[i] > 0.0 { reflect_unit((v - lower[i]) / span[i]) } else { 0.0 })
            .collect()
    };

    let mut u: Vec<f64> = match start {
        Some(x) => to_u(x),
        None => (0..dim).map(|_| rng.random::<f64>()).collect(),
    };
    let initial_x = to_x(&u);
    let mut value = sanitize(f(&initial_x));
    let mut best_u = u.clone();
    let mut best = value;
    let mut records = Vec::with_capacity(settings.max_iterations);
    let mut k = 0usize;
    let t_restart = settings.initial_temperature * settings.restart_ratio;

    for iteration in 0..settings.max_iterations {
        let mut t = visiting_temperature(settings.initial_temperature, settings.qv, k);
        if t < t_restart {
            k = 0;
            t = settings.initial_temperature;
            u = (0..dim).map(|_| rng.random::<f64>()).collect();
            value = sanitize(f(&to_x(&u)));
            if value > best {
                best = value;
                best_u = u.clone();
            }
        }
        let mut cand = u.clone();
        if iteration % 2 == 0 {
            for c in cand.iter_mut() {
                *c = reflect_unit(*c + visit_step(rng, settings.qv, t));
            }
        } else if dim > 0 {
            let j = (iteration / 2) % dim;
            cand[j] = reflect_unit(cand[j] + visit_step(rng, settings.qv, t));
        }
        let cand_value = sanitize(f(&to_x(&cand)));
        // energies are negated objective values
        let de = value - cand_value;
        let accept = if de <= 0.0 {
            true
        } else {
            let ta = t / (k as f64 + 1.0);
            let base = 1.0 - (1.0 - settings.qa) * de / ta;
            let r: f64 = rng.random();
            base > 0.0 && r <= (base.ln() / (1.0 - settings.qa)).exp()
        };
        if accept {
            u = cand;
            value = cand_value;
            if value > best {
                best = value;
                best_u = u.clone();
            }
        }
        records.push(AnnealRecord { iteration, best, accepted: value, temperature: t });
        k += 1;
    }
    AnnealOutcome { best_x: to_x(&best_u), best_value: best, initial_x, records }
}

/// Outcome of [`compass_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolishOutcome {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    /// Best value after each evaluation.
    pub history: Vec<f64>,
}

/// Derivative-free coordinate polish of `f` from `start`, at most `budget`
/// evaluations. Steps are fractions of each coordinate's range, halved when no
/// coordinate improves; a step that leaves the box is clipped.
pub fn compass_search<F>(f: F, lower: &[f64], upper: &[f64], start: &[f64], start_value: f64, budget: usize, initial_step: f64) -> PolishOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let dim = lower.len();
    let mut x = start.to_vec();
    let mut best = sanitize(start_value);
    let mut history = Vec::with_capacity(budget);
    let mut step = initial_step;
    'outer: while history.len() < budget && step > 1e-6 {
        let mut improved = false;
        for i in 0..dim {
            let span = upper[i] - lower[i];
            if span <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                if history.len() >= budget {
                    break 'outer;
                }
                let mut cand = x.clone();
                cand[i] = (x[i] + dir * step * span).clamp(lower[i], upper[i]);
                if cand[i] == x[i] {
                    continue;
                }
                let v = sanitize(f(&cand));
                let better = v > best;
                if better {
                    best = v;
                    x = cand;
                    improved = true;
                }
                history.push(best);
                if better {
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    PolishOutcome { best_x: x, best_value: best, history }
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}
