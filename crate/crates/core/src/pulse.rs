//! Control-pulse parameterisation: knot values, cubic interpolation and
//! hardware digitisation (1 us steps, 8-bit amplitude resolution).
//!
//! Times are in microseconds, amplitudes in MHz, phases in radians.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_KNOTS: usize = 10;
/// Duration of one digitised control step (us).
pub const STEP_DURATION_US: f64 = 1.0;
pub const AMPLITUDE_BITS: u32 = 8;

/// Knot values of the two Rabi amplitudes and the relative phase.
///
/// Knots are equally spaced on `[0, T]` and include both endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseParams<T> {
    #[serde(rename = "T_us")]
    pub total_time: T,
    pub omega1: Vec<T>,
    pub omega2: Vec<T>,
    pub phi: Vec<T>,
}

impl<T: Real> PulseParams<T> {
    pub fn constant(total_time: T, omega1: T, omega2: T, phi: T) -> Self {
        Self {
            total_time,
            omega1: vec![omega1; DEFAULT_KNOTS],
            omega2: vec![omega2; DEFAULT_KNOTS],
            phi: vec![phi; DEFAULT_KNOTS],
        }
    }

    pub fn knots(&self) -> usize {
        self.omega1.len()
    }

    pub fn validate(&self, omega_max: T) -> Result<()> {
        let k = self.omega1.len();
        if k < 2 || self.omega2.len() != k || self.phi.len() != k {
            return Err(Error::InvalidArgument(format!(
                "pulse needs matching knot vectors of length >= 2 (got {}, {}, {})",
                self.omega1.len(),
                self.omega2.len(),
                self.phi.len()
            )));
        }
        if !(self.total_time > T::zero()) || !self.total_time.is_finite() {
            return Err(Error::InvalidArgument(format!("pulse duration must be positive, got {}", self.total_time)));
        }
        let amp_ok = |v: &T| *v >= T::zero() && *v <= omega_max;
        if !self.omega1.iter().chain(&self.omega2).all(amp_ok) {
            return Err(Error::InvalidArgument(format!("amplitude knots must lie in [0, {omega_max}]")));
        }
        if !self.phi.iter().all(|p| *p >= T::zero() && *p <= T::TAU()) {
            return Err(Error::InvalidArgument("phase knots must lie in [0, 2pi]".into()));
        }
        Ok(())
    }

    /// Flattens to `[T, omega1.., omega2.., phi..]`.
    pub fn to_vector(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(1 + 3 * self.knots());
        v.push(self.total_time);
        v.extend_from_slice(&self.omega1);
        v.extend_from_slice(&self.omega2);
        v.extend_from_slice(&self.phi);
        v
    }

    pub fn from_vector(v: &[T]) -> Result<Self> {
        if v.len() < 7 || (v.len() - 1) % 3 != 0 {
            return Err(Error::InvalidArgument(format!("cannot split {} values into T + 3 knot vectors", v.len())));
        }
        let k = (v.len() - 1) / 3;
        Ok(Self {
            total_time: v[0],
            omega1: v[1..1 + k].to_vec(),
            omega2: v[1 + k..1 + 2 * k].to_vec(),
            phi: v[1 + 2 * k..].to_vec(),
        })
    }
}

impl PulseParams<f64> {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Clone, Debug)]
pub struct NaturalCubicSpline<T> {
    x: Vec<T>,
    y: Vec<T>,
    /// second derivatives at the knots
    m: Vec<T>,
}

impl<T: Real> NaturalCubicSpline<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidArgument("spline needs at least two (x, y) pairs".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must be strictly increasing".into()));
        }
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // Thomas algorithm on the interior equations
            let k = n - 2;
            let mut diag = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            let six = T::lit(6.0);
            for j in 0..k {
                let i = j + 1;
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[j] = T::lit(2.0) * (h0 + h1);
                upper[j] = h1;
                rhs[j] = six * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for j in 1..k {
                let lower = x[j + 1] - x[j];
                let w = lower / diag[j - 1];
                diag[j] = diag[j] - w * upper[j - 1];
                rhs[j] = rhs[j] - w * rhs[j - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }

    pub fn second_derivatives(&self) -> &[T] {
        &self.m
    }

    /// Evaluates the spline; outside the knot range the end cubic is extended.
    pub fn eval(&self, t: T) -> T {
        let n = self.x.len();
        let i = match self.x.iter().position(|&xi| xi > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - t, t - x0);
        let six = T::lit(6.0);
        self.m[i] * a * a * a / (six * h)
            + self.m[i + 1] * b * b * b / (six * h)
            + (self.y[i] / h - self.m[i] * h / six) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / six) * b
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlPoint<T> {
    pub omega1: T,
    pub omega2: T,
    pub phi: T,
}

/// Interpolated, clamped pulse built once from [`PulseParams`].
#[derive(Clone, Debug)]
pub struct PulseShape<T> {
    total_time: T,
    omega_max: T,
    omega1: NaturalCubicSpline<T>,
    omega2: NaturalCubicSpline<T>,
    phi: NaturalCubicSpline<T>,
}

impl<T: Real> PulseShape<T> {
    pub fn new(params: &PulseParams<T>, omega_max: T) -> Result<Self> {
        params.validate(omega_max)?;
        let k = params.knots();
        let last = T::from_usize_lossy(k - 1);
        let x: Vec<T> = (0..k).map(|i| params.total_time * T::from_usize_lossy(i) / last).collect();
        Ok(Self {
            total_time: params.total_time,
            omega_max,
            omega1: NaturalCubicSpline::new(x.clone(), params.omega1.clone())?,
            omega2: NaturalCubicSpline::new(x.clone(), params.omega2.clone())?,
            phi: NaturalCubicSpline::new(x, params.phi.clone())?,
        })
    }

    pub fn total_time(&self) -> T {
        self.total_time
    }

    pub fn at(&self, t: T) -> Result<ControlPoint<T>> {
        if !(t >= T::zero() && t <= self.total_time) {
            return Err(Error::TimeOutOfRange { t: t.as_f64(), total: self.total_time.as_f64() });
        }
        let clamp = |v: T| v.max(T::zero()).min(self.omega_max);
        Ok(ControlPoint {
            omega1: clamp(self.omega1.eval(t)),
            omega2: clamp(self.omega2.eval(t)),
            phi: wrap_phase(self.phi.eval(t)),
        })
    }
}

/// Wraps into `[0, 2pi)`.
pub fn wrap_phase<T: Real>(phi: T) -> T {
    let tau = T::TAU();
    let w = phi % tau;
    let w = if w < T::zero() { w + tau } else { w };
    if w >= tau {
        T::zero()
    } else {
        w
    }
}

pub fn interpolate<T: Real>(params: &PulseParams<T>, t: T, omega_max: T) -> Result<ControlPoint<T>> {
    PulseShape::new(params, omega_max)?.at(t)
}

/// Rounds to the nearest multiple of `omega_max / 2^8` inside `[0, omega_max]`.
pub fn quantize_amplitude<T: Real>(value: T, omega_max: T) -> T {
    let levels = T::from_u32(1u32 << AMPLITUDE_BITS).unwrap();
    let lsb = omega_max / levels;
    let code = (value / lsb).round().max(T::zero()).min(levels);
    code * lsb
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseStep<T> {
    pub omega1: T,
    pub omega2: T,
    pub phi: T,
}

/// Piecewise-constant control sequence. Step `i` spans
/// `[i * step_duration, min((i + 1) * step_duration, total_time)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitizedPulse<T> {
    pub step_duration: T,
    pub total_time: T,
    pub steps: Vec<PulseStep<T>>,
}

impl<T: Real> DigitizedPulse<T> {
    pub fn empty() -> Self {
        Self { step_duration: T::lit(STEP_DURATION_US), total_time: T::zero(), steps: Vec::new() }
    }

    /// Constant controls over `n_steps` full steps.
    pub fn constant(n_steps: usize, omega1: T, omega2: T, phi: T) -> Self {
        let dt = T::lit(STEP_DURATION_US);
        Self {
            step_duration: dt,
            total_time: dt * T::from_usize_lossy(n_steps),
            steps: vec![PulseStep { omega1, omega2, phi }; n_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn interval(&self, i: usize) -> (T, T) {
        let t0 = self.step_duration * T::from_usize_lossy(i);
        let t1 = (t0 + self.step_duration).min(self.total_time);
        (t0, t1)
    }

    /// Re-applies amplitude quantisation; a no-op on digitised output.
    pub fn requantized(&self, omega_max: T) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| PulseStep {
                omega1: quantize_amplitude(s.omega1, omega_max),
                omega2: quantize_amplitude(s.omega2, omega_max),
                phi: s.phi,
            })
            .collect();
        Self { steps, ..self.clone() }
    }

    /// CSV with header `step_index,omega1,omega2,phi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step_index", "omega1", "omega2", "phi"])?;
        for (i, s) in self.steps.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.omega1.as_f64().to_string(),
                s.omega2.as_f64().to_string(),
                s.phi.as_f64().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of control steps covering `total_time`.
pub fn step_count<T: Real>(total_time: T, step_duration: T) -> usize {
    let ratio = total_time / step_duration;
    // absorb round-off so that e.g. 10.000000000001 still gives 10 steps
    let n = (ratio - T::lit(1e-9)).ceil();
    n.max(T::zero()).to_usize().unwrap_or(0)
}

/// Samples the interpolated pulse at step midpoints and quantises amplitudes.
/// The phase is left unquantised.
pub fn digitize<T: Real>(params: &PulseParams<T>, omega_max: T) -> Result<DigitizedPulse<T>> {
    let shape = PulseShape::new(params, omega_max)?;
    let dt = T::lit(STEP_DURATION_US);
    let n = step_count(params.total_time, dt);
    let mut pulse = DigitizedPulse { step_duration: dt, total_time: params.total_time, steps: Vec::with_capacity(n) };
    for i in 0..n {
        let (t0, t1) = pulse.interval(i);
        let c = shape.at((t0 + t1) * T::lit(0.5))?;
        pulse.steps.push(PulseStep {
            omega1: quantize_amplitude(c.omega1, omega_max),
            omega2: quantize_amplitude(c.omega2, omega_max),
            phi: c.phi,
        });
    }
    Ok(pulse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn params_from(omega1: Vec<f64>) -> PulseParams<f64> {
        let k = omega1.len();
        PulseParams { total_time: 9.0, omega1, omega2: vec![0.5; k], phi: vec![1.0; k] }
    }

    #[test]
    fn constant_knots_give_constant_function() {
        let p = PulseParams::constant(12.0, 0.37, 0.8, 2.0);
        let shape = PulseShape::new(&p, 1.0).unwrap();
        for i in 0..=120 {
            let c = shape.at(i as f64 * 0.1).unwrap();
            assert!((c.omega1 - 0.37).abs() < 1e-14);
            assert!((c.omega2 - 0.8).abs() < 1e-14);
            assert!((c.phi - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spline_hits_knots() {
        let knots = vec![0.1, 0.9, 0.3, 0.5, 0.0, 1.0, 0.2, 0.6, 0.4, 0.7];
        let p = params_from(knots.clone());
        let shape = PulseShape::new(&p, 1.0).unwrap();
        for (i, k) in knots.iter().enumerate() {
            let c = shape.at(i as f64).unwrap();
            assert!((c.omega1 - k).abs() < 1e-14, "knot {i}");
        }
    }

    #[test]
    fn linear_knots_reproduce_linear_function() {
        let knots: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
        let p = params_from(knots);
        let shape = PulseShape::new(&p, 1.0).unwrap();
        for i in 0..=90 {
            let t = i as f64 * 0.1;
            assert!((shape.at(t).unwrap().omega1 - (0.05 + 0.1 * t)).abs() < 1e-13);
        }
    }

    /// Independent route: assemble the full (n x n) natural-spline system
    /// including the boundary rows and solve it with dense LU.
    #[test]
    fn second_derivatives_match_dense_solve() {
        let x: Vec<f64> = vec![0.0, 0.7, 1.1, 2.0, 2.4, 3.9, 4.0];
        let y: Vec<f64> = vec![0.3, -0.2, 0.8, 0.1, 0.9, -0.5, 0.0];
        let n = x.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        a[(0, 0)] = 1.0;
        a[(n - 1, n - 1)] = 1.0;
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            a[(i, i - 1)] = h0;
            a[(i, i)] = 2.0 * (h0 + h1);
            a[(i, i + 1)] = h1;
            b[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        let m = a.lu().solve(&b).unwrap();
        let spline = NaturalCubicSpline::new(x, y).unwrap();
        for i in 0..n {
            assert!((spline.second_derivatives()[i] - m[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_time_is_rejected() {
        let p = PulseParams::constant(5.0, 0.1, 0.1, 0.0);
        assert!(matches!(interpolate(&p, 5.5, 1.0), Err(Error::TimeOutOfRange { .. })));
        assert!(interpolate(&p, -0.1, 1.0).is_err());
        assert!(interpolate(&p, 5.0, 1.0).is_ok());
    }

    #[test]
    fn overshoot_is_clamped() {
        let mut knots = vec![0.0; 10];
        knots[5] = 1.0;
        knots[6] = 1.0;
        let p = params_from(knots);
        let shape = PulseShape::new(&p, 1.0).unwrap();
        for i in 0..=900 {
            let c = shape.at(i as f64 * 0.01).unwrap();
            assert!((0.0..=1.0).contains(&c.omega1));
        }
    }

    #[test]
    fn phase_wraps_into_range() {
        assert_eq!(wrap_phase(0.0f64), 0.0);
        assert!((wrap_phase(7.0f64) - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);
        assert!((wrap_phase(-0.5f64) - (std::f64::consts::TAU - 0.5)).abs() < 1e-15);
        assert_eq!(wrap_phase(std::f64::consts::TAU), 0.0);
    }

    #[test]
    fn digitize_constant_half() {
        let p = PulseParams::constant(6.0f64, 0.5, 0.5, 0.3);
        let d = digitize(&p, 1.0).unwrap();
        assert_eq!(d.len(), 6);
        for s in &d.steps {
            assert_eq!(s.omega1, 0.5);
            assert_eq!(s.omega2, 0.5);
            assert!((s.phi - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn tiny_amplitude_quantizes_to_zero() {
        assert_eq!(quantize_amplitude(0.00001f64, 1.0), 0.0);
        let p = PulseParams::constant(3.0, 0.00001, 0.00001, 0.0);
        assert!(digitize(&p, 1.0).unwrap().steps.iter().all(|s| s.omega1 == 0.0));
    }

    #[test]
    fn step_count_uses_ceiling() {
        let p = PulseParams::constant(10.4, 0.2, 0.2, 0.0);
        let d = digitize(&p, 1.0).unwrap();
        assert_eq!(d.len(), 11);
        assert_eq!(d.interval(10), (10.0, 10.4));
        assert_eq!(step_count(10.0f64, 1.0), 10);
        assert_eq!(step_count(10.0 + 1e-12f64, 1.0), 10);
    }

    #[test]
    fn json_round_trip_uses_documented_keys() {
        let p = PulseParams::constant(20.0, 0.25, 0.5, 1.5);
        let s = p.to_json().unwrap();
        assert!(s.contains("\"T_us\""));
        assert_eq!(PulseParams::from_json(&s).unwrap(), p);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let d = digitize(&PulseParams::constant(2.5, 0.5, 0.25, 1.0), 1.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step_index,omega1,omega2,phi");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.5,0.25,"));
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(PulseParams::constant(0.0, 0.1, 0.1, 0.0).validate(1.0).is_err());
        assert!(PulseParams::constant(5.0, 1.5, 0.1, 0.0).validate(1.0).is_err());
        assert!(PulseParams::constant(5.0, 0.5, 0.1, 7.0).validate(1.0).is_err());
        let mut p = PulseParams::constant(5.0, 0.5, 0.1, 0.0);
        p.phi.pop();
        assert!(p.validate(1.0).is_err());
    }

    #[test]
    fn single_precision_spline() {
        let p = PulseParams::<f32>::constant(4.0, 0.25, 0.75, 1.0);
        let d = digitize(&p, 1.0f32).unwrap();
        assert_eq!(d.steps[0].omega2, 0.75);
    }

    proptest! {
        #[test]
        fn quantization_error_and_idempotence(
            knots in proptest::collection::vec(0.0f64..=1.0, 10),
            t in 1.0f64..30.0,
        ) {
            let p = PulseParams { total_time: t, omega1: knots.clone(), omega2: knots, phi: vec![0.0; 10] };
            let shape = PulseShape::new(&p, 1.0).unwrap();
            let d = digitize(&p, 1.0).unwrap();
            for (i, s) in d.steps.iter().enumerate() {
                let (t0, t1) = d.interval(i);
                let exact = shape.at(0.5 * (t0 + t1)).unwrap().omega1;
                prop_assert!((s.omega1 - exact).abs() <= 1.0 / 512.0 + 1e-15);
            }
            prop_assert_eq!(d.requantized(1.0), d);
        }

        #[test]
        fn distinct_knots_usually_change_the_pulse(
            a in proptest::collection::vec(0.0f64..=1.0, 10),
            b in proptest::collection::vec(0.0f64..=1.0, 10),
        ) {
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assume!(diff > 0.1);
            let pa = PulseParams { total_time: 20.0, omega1: a, omega2: vec![0.0; 10], phi: vec![0.0; 10] };
            let pb = PulseParams { omega1: b, ..pa.clone() };
            prop_assert_ne!(digitize(&pa, 1.0).unwrap(), digitize(&pb, 1.0).unwrap());
        }
    }
}
