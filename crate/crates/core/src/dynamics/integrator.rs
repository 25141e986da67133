//! Embedded Dormand-Prince 5(4) integrator on flat complex state vectors.

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions<T> {
    pub atol: T,
    pub rtol: T,
    /// Attempted steps allowed per call to [`DormandPrince::integrate`].
    pub max_steps: usize,
}

impl<T: Real> Default for IntegratorOptions<T> {
    fn default() -> Self {
        // single precision cannot resolve the double-precision tolerances
        let floor = T::epsilon() * T::lit(100.0);
        Self { atol: T::lit(2e-11).max(floor), rtol: T::lit(2e-9).max(floor), max_steps: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive integrator with reusable work buffers.
///
/// The last accepted step size is remembered between calls, which suits a
/// sequence of short piecewise-constant control intervals.
pub struct DormandPrince<T: Real> {
    options: IntegratorOptions<T>,
    k: [Vec<C<T>>; 7],
    ytmp: Vec<C<T>>,
    ynew: Vec<C<T>>,
    h: Option<T>,
    fsal_valid: bool,
}

impl<T: Real> DormandPrince<T> {
    pub fn new(dim: usize, options: IntegratorOptions<T>) -> Self {
        let z = || vec![czero(); dim];
        Self {
            options,
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            h: None,
            fsal_valid: false,
        }
    }

    pub fn options(&self) -> &IntegratorOptions<T> {
        &self.options
    }

    /// Advances `y` from `t0` to `t1` under `dy/dt = f(y)`.
    ///
    /// The FSAL derivative is invalidated on entry because `f` may differ
    /// from the previous call.
    pub fn integrate<F>(&mut self, mut f: F, y: &mut [C<T>], t0: T, t1: T) -> Result<StepStats>
    where
        F: FnMut(&[C<T>], &mut [C<T>]),
    {
        let mut stats = StepStats::default();
        let span = t1 - t0;
        if span <= T::zero() {
            return Ok(stats);
        }
        self.fsal_valid = false;
        let mut t = t0;
        let mut h = self.h.unwrap_or(span * T::lit(0.05)).min(span);
        let tiny = T::epsilon() * T::lit(16.0) * (t1.abs() + T::one());
        let (atol, rtol) = (self.options.atol, self.options.rtol);

        let mut attempts = 0usize;
        while t1 - t > tiny {
            attempts += 1;
            if attempts > self.options.max_steps {
                return Err(Error::IntegratorFailure { time: t.as_f64(), steps: attempts });
            }
            let last = h >= t1 - t;
            if last {
                h = t1 - t;
            }
            if !self.fsal_valid {
                f(y, &mut self.k[0]);
                stats.rhs_evals += 1;
            }
            self.stages(&mut f, y, h);
            stats.rhs_evals += 6;

            // max-norm error estimate from the embedded pair; an RMS norm is
            // diluted by the many empty entries of a density matrix
            let mut err = T::zero();
            let (e1, e3, e4, e5, e6, e7) =
                (T::lit(E1), T::lit(E3), T::lit(E4), T::lit(E5), T::lit(E6), T::lit(E7));
            for i in 0..y.len() {
                let k = &self.k;
                let e = (k[0][i] * e1 + k[2][i] * e3 + k[3][i] * e4 + k[4][i] * e5 + k[5][i] * e6
                    + k[6][i] * e7)
                    * h;
                let scale = atol + rtol * y[i].norm().max(self.ynew[i].norm());
                err = err.max(e.norm() / scale);
            }

            if !err.is_finite() {
                stats.rejected += 1;
                h = h * T::lit(0.1);
                self.fsal_valid = true;
                continue;
            }

            let fac = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
            };
            if err <= T::one() {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.ynew);
                self.k.swap(0, 6);
                stats.accepted += 1;
                if !last {
                    h = h * fac;
                } else {
                    // keep the step the controller would have proposed for reuse
                    self.h = Some((h * fac).max(self.h.unwrap_or(h)).min(span));
                    self.fsal_valid = true;
                    return Ok(stats);
                }
                self.h = Some(h);
            } else {
                stats.rejected += 1;
                h = h * fac.min(T::one());
            }
            self.fsal_valid = true;
        }
        Ok(stats)
    }

    fn stages<F>(&mut self, f: &mut F, y: &[C<T>], h: T)
    where
        F: FnMut(&[C<T>], &mut [C<T>]),
    {
        let n = y.len();
        // autonomous right-hand side: stage times are not needed
        let l = |x: f64| T::lit(x) * h;

        let a21 = l(A21);
        for i in 0..n {
            self.ytmp[i] = y[i] + self.k[0][i] * a21;
        }
        f(&self.ytmp, &mut self.k[1]);

        let (a31, a32) = (l(A31), l(A32));
        for i in 0..n {
            self.ytmp[i] = y[i] + self.k[0][i] * a31 + self.k[1][i] * a32;
        }
        f(&self.ytmp, &mut self.k[2]);

        let (a41, a42, a43) = (l(A41), l(A42), l(A43));
        for i in 0..n {
            self.ytmp[i] = y[i] + self.k[0][i] * a41 + self.k[1][i] * a42 + self.k[2][i] * a43;
        }
        f(&self.ytmp, &mut self.k[3]);

        let (a51, a52, a53, a54) = (l(A51), l(A52), l(A53), l(A54));
        for i in 0..n {
            self.ytmp[i] = y[i]
                + self.k[0][i] * a51
                + self.k[1][i] * a52
                + self.k[2][i] * a53
                + self.k[3][i] * a54;
        }
        f(&self.ytmp, &mut self.k[4]);

        let (a61, a62, a63, a64, a65) = (l(A61), l(A62), l(A63), l(A64), l(A65));
        for i in 0..n {
            self.ytmp[i] = y[i]
                + self.k[0][i] * a61
                + self.k[1][i] * a62
                + self.k[2][i] * a63
                + self.k[3][i] * a64
                + self.k[4][i] * a65;
        }
        f(&self.ytmp, &mut self.k[5]);

        let (a71, a73, a74, a75, a76) = (l(A71), l(A73), l(A74), l(A75), l(A76));
        for i in 0..n {
            self.ynew[i] = y[i]
                + self.k[0][i] * a71
                + self.k[2][i] * a73
                + self.k[3][i] * a74
                + self.k[4][i] * a75
                + self.k[5][i] * a76;
        }
        f(&self.ynew, &mut self.k[6]);
    }
}
