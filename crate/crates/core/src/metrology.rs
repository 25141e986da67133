//! Ramsey-type readout (pi/2, phase, pi/2, population measurement) and the
//! classical Fisher information of the outcome distribution.
//!
//! Qubit index convention: atom 0 is the most significant bit and `|1>` is
//! bit value 1. `sigma_z |0> = +|0>`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::hilbert::Basis;
use crate::scalar::{cre, czero, Real, C};

pub const THETA_GRID_POINTS: usize = 256;
pub const GOLDEN_TOLERANCE: f64 = 1e-6;
/// Probabilities below this are treated as zero in the Fisher sum.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingCase {
    /// Every atom picks up the same phase.
    CommonField,
    /// The two halves pick up opposite half-phases.
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingScenario {
    pub n_atoms: usize,
    pub excitations: usize,
    pub case: SensingCase,
}

impl SensingScenario {
    pub fn new(n_atoms: usize, excitations: usize, case: SensingCase) -> Result<Self> {
        let s = Self { n_atoms, excitations, case };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 || self.n_atoms > 16 {
            return Err(Error::InvalidArgument(format!("atom count must be in 1..=16, got {}", self.n_atoms)));
        }
        if self.excitations > self.n_atoms {
            return Err(Error::InvalidExcitation { n_atoms: self.n_atoms, m: self.excitations });
        }
        if self.case == SensingCase::Gradient && self.n_atoms % 2 == 1 {
            return Err(Error::OddAtomCount(self.n_atoms));
        }
        Ok(())
    }

    /// Per-atom multiplier of theta.
    pub fn phase_pattern<T: Real>(&self) -> Vec<T> {
        match self.case {
            SensingCase::CommonField => vec![T::one(); self.n_atoms],
            SensingCase::Gradient => (0..self.n_atoms)
                .map(|a| if a < self.n_atoms / 2 { T::lit(0.5) } else { T::lit(-0.5) })
                .collect(),
        }
    }

    /// Fisher information of the unentangled reference state.
    pub fn classical_baseline(&self) -> f64 {
        let n = self.n_atoms as f64;
        match self.case {
            SensingCase::CommonField => n,
            SensingCase::Gradient => n / 4.0,
        }
    }
}

/// Density matrix over the `2^N` qubit space.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicState<T: Real> {
    n_qubits: usize,
    matrix: DMatrix<C<T>>,
    discarded: T,
}

impl<T: Real> AtomicState<T> {
    pub fn from_matrix(n_qubits: usize, matrix: DMatrix<C<T>>) -> Result<Self> {
        let d = 1usize << n_qubits;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        Ok(Self { n_qubits, matrix, discarded: T::zero() })
    }

    /// `|psi><psi|`, normalised.
    pub fn from_amplitudes(n_qubits: usize, psi: &[C<T>]) -> Result<Self> {
        let d = 1usize << n_qubits;
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: psi.len() });
        }
        let rho = DensityMatrix::from_state_vector(psi);
        Self::from_matrix(n_qubits, rho.into_matrix())
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let rho = DensityMatrix::maximally_mixed(d);
        Self { n_qubits, matrix: rho.into_matrix(), discarded: T::zero() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Population that was outside the qubit space when the state was reduced.
    pub fn discarded_population(&self) -> T {
        self.discarded
    }
}

/// Traces out the cavity and keeps only components with every atom in a
/// qubit level.
pub fn reduce_to_qubits<T: Real>(rho: &DensityMatrix<T>, basis: &Basis) -> Result<AtomicState<T>> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: rho.dim() });
    }
    let n = basis.n_atoms();
    let d = 1usize << n;
    let mut q = DMatrix::from_element(d, d, czero());
    let qubit: Vec<Option<usize>> = basis.states().iter().map(|s| s.qubit_index()).collect();
    let mut discarded = T::zero();
    for j in 0..basis.dim() {
        let Some(qj) = qubit[j] else {
            discarded += rho.population(j);
            continue;
        };
        let nj = basis.state(j).photons;
        for i in 0..basis.dim() {
            if let Some(qi) = qubit[i] {
                if basis.state(i).photons == nj {
                    q[(qi, qj)] += rho.get(i, j);
                }
            }
        }
    }
    Ok(AtomicState { n_qubits: n, matrix: q, discarded })
}

/// `U X U^dagger` with `U = R^(x)N`, `R = exp(-i pi/4 sigma_y)`.
fn conjugate_by_rotation<T: Real>(x: &mut DMatrix<C<T>>, n_qubits: usize) {
    let d = x.nrows();
    let c = cre(T::FRAC_1_SQRT_2());
    for q in 0..n_qubits {
        let bit = 1usize << (n_qubits - 1 - q);
        // rows: R acting from the left
        for col in 0..d {
            for i0 in (0..d).filter(|i| i & bit == 0) {
                let i1 = i0 | bit;
                let (a, b) = (x[(i0, col)], x[(i1, col)]);
                x[(i0, col)] = (a - b) * c;
                x[(i1, col)] = (a + b) * c;
            }
        }
        // columns: R^dagger from the right, R is real
        for j0 in (0..d).filter(|j| j & bit == 0) {
            let j1 = j0 | bit;
            for row in 0..d {
                let (a, b) = (x[(row, j0)], x[(row, j1)]);
                x[(row, j0)] = (a - b) * c;
                x[(row, j1)] = (a + b) * c;
            }
        }
    }
}

pub fn apply_pi_half<T: Real>(state: &AtomicState<T>) -> AtomicState<T> {
    let mut out = state.clone();
    conjugate_by_rotation(&mut out.matrix, state.n_qubits);
    out
}

/// `sum_A s_A z_A / 2` for every computational basis state.
fn phase_generator<T: Real>(scenario: &SensingScenario) -> Vec<T> {
    let weights = scenario.phase_pattern::<T>();
    let n = scenario.n_atoms;
    (0..1usize << n)
        .map(|k| {
            let mut g = T::zero();
            for (a, w) in weights.iter().enumerate() {
                let one = (k >> (n - 1 - a)) & 1 == 1;
                g += if one { -*w } else { *w };
            }
            g * T::lit(0.5)
        })
        .collect()
}

fn check_scenario<T: Real>(state: &AtomicState<T>, scenario: &SensingScenario) -> Result<()> {
    scenario.validate()?;
    if scenario.n_atoms != state.n_qubits {
        return Err(Error::DimensionMismatch { expected: state.n_qubits, found: scenario.n_atoms });
    }
    Ok(())
}

/// Conjugation by `exp(-i theta sum_A s_A sigma_z^A / 2)`.
pub fn apply_phase<T: Real>(state: &AtomicState<T>, scenario: &SensingScenario, theta: T) -> Result<AtomicState<T>> {
    check_scenario(state, scenario)?;
    let g = phase_generator::<T>(scenario);
    Ok(apply_diagonal_phase(state, &g, theta))
}

fn apply_diagonal_phase<T: Real>(state: &AtomicState<T>, g: &[T], theta: T) -> AtomicState<T> {
    let mut out = state.clone();
    let d = state.dim();
    for j in 0..d {
        for i in 0..d {
            let phase = C::from_polar(T::one(), -(g[i] - g[j]) * theta);
            out.matrix[(i, j)] *= phase;
        }
    }
    out
}

/// Common `sigma_z` rotation by `c` on every atom, applied to the prepared state.
pub fn inject_common_phase<T: Real>(state: &AtomicState<T>, c: T) -> AtomicState<T> {
    let common = SensingScenario { n_atoms: state.n_qubits, excitations: 0, case: SensingCase::CommonField };
    apply_diagonal_phase(state, &phase_generator::<T>(&common), c)
}

pub fn outcome_probabilities<T: Real>(state: &AtomicState<T>) -> Vec<T> {
    (0..state.dim()).map(|i| state.matrix[(i, i)].re).collect()
}

/// Outcome probabilities and their theta-derivatives for one prepared state.
#[derive(Clone, Debug)]
pub struct FisherEvaluator<T: Real> {
    n_qubits: usize,
    generator: Vec<T>,
    /// state after the first pi/2 pulse
    rotated: DMatrix<C<T>>,
}

impl<T: Real> FisherEvaluator<T> {
    pub fn new(state0: &AtomicState<T>, scenario: &SensingScenario) -> Result<Self> {
        check_scenario(state0, scenario)?;
        let mut rotated = state0.matrix.clone();
        conjugate_by_rotation(&mut rotated, state0.n_qubits);
        Ok(Self { n_qubits: state0.n_qubits, generator: phase_generator(scenario), rotated })
    }

    fn phased(&self, theta: T) -> DMatrix<C<T>> {
        let g = &self.generator;
        let d = self.rotated.nrows();
        DMatrix::from_fn(d, d, |i, j| self.rotated[(i, j)] * C::from_polar(T::one(), -(g[i] - g[j]) * theta))
    }

    fn readout_diagonal(&self, mut x: DMatrix<C<T>>) -> Vec<T> {
        conjugate_by_rotation(&mut x, self.n_qubits);
        (0..x.nrows()).map(|i| x[(i, i)].re).collect()
    }

    pub fn probabilities(&self, theta: T) -> Vec<T> {
        self.readout_diagonal(self.phased(theta))
    }

    /// `dp_j/dtheta = <b_j| U [i rho_theta G - i G rho_theta] U^dagger |b_j>`
    pub fn derivatives(&self, theta: T) -> (Vec<T>, Vec<T>) {
        let rho = self.phased(theta);
        let g = &self.generator;
        let d = rho.nrows();
        let comm = DMatrix::from_fn(d, d, |i, j| rho[(i, j)] * C::new(T::zero(), g[j] - g[i]));
        (self.readout_diagonal(rho), self.readout_diagonal(comm))
    }

    pub fn fisher(&self, theta: T) -> T {
        let (p, dp) = self.derivatives(theta);
        fisher_sum(&p, &dp)
    }
}

fn fisher_sum<T: Real>(p: &[T], dp: &[T]) -> T {
    let floor = T::lit(PROBABILITY_FLOOR);
    let mut f = T::zero();
    for (&pj, &dj) in p.iter().zip(dp) {
        let d2 = dj * dj;
        if pj < floor {
            if d2 < floor {
                continue;
            }
            log::warn!("outcome probability {pj} below floor with slope {dj}; using the floor");
            f += d2 / floor;
        } else {
            f += d2 / pj;
        }
    }
    f
}

pub fn fisher<T: Real>(state0: &AtomicState<T>, scenario: &SensingScenario, theta: T) -> Result<T> {
    Ok(FisherEvaluator::new(state0, scenario)?.fisher(theta))
}

fn theta_grid<T: Real>() -> Vec<T> {
    (0..THETA_GRID_POINTS)
        .map(|k| T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(THETA_GRID_POINTS))
        .collect()
}

impl<T: Real> FisherEvaluator<T> {
    fn curve(&self, grid: &[T]) -> Vec<T> {
        if self.rotated.nrows() >= 64 {
            grid.par_iter().map(|&t| self.fisher(t)).collect()
        } else {
            grid.iter().map(|&t| self.fisher(t)).collect()
        }
    }

    /// Grid maximum refined by golden-section search on the neighbouring cells.
    fn maximize(&self, grid: &[T], values: &[T]) -> (T, T) {
        let (k, &best) = values
            .iter()
            .enumerate()
            .fold((0, &values[0]), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
        let step = T::TAU() / T::from_usize_lossy(grid.len());
        let (mut a, mut b) = (grid[k] - step, grid[k] + step);
        let ratio = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut f2) = (self.fisher(x1), self.fisher(x2));
        let tol = T::lit(GOLDEN_TOLERANCE).max(T::epsilon().sqrt());
        while b - a > tol {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = self.fisher(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = self.fisher(x1);
            }
        }
        let x = (a + b) * T::lit(0.5);
        let fx = self.fisher(x);
        if fx >= best {
            (crate::pulse::wrap_phase(x), fx)
        } else {
            (grid[k], best)
        }
    }
}

/// `(theta_star, F_max)` over `[0, 2 pi)`.
pub fn fisher_max<T: Real>(state0: &AtomicState<T>, scenario: &SensingScenario) -> Result<(T, T)> {
    let eval = FisherEvaluator::new(state0, scenario)?;
    let grid = theta_grid::<T>();
    let values = eval.curve(&grid);
    Ok(eval.maximize(&grid, &values))
}

/// Equal-amplitude symmetric state with `m` atoms in `|1>`.
pub fn make_dicke_state<T: Real>(n: usize, m: usize) -> Result<AtomicState<T>> {
    if n == 0 || m > n || n > 16 {
        return Err(Error::InvalidExcitation { n_atoms: n, m });
    }
    let psi: Vec<C<T>> = (0..1usize << n)
        .map(|k| if k.count_ones() as usize == m { cre(T::one()) } else { czero() })
        .collect();
    AtomicState::from_amplitudes(n, &psi)
}

/// Unentangled reference `|1 1 ... 1>`.
pub fn make_classical_state<T: Real>(n: usize) -> Result<AtomicState<T>> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidArgument(format!("atom count must be in 1..=16, got {n}")));
    }
    let mut psi = vec![czero(); 1usize << n];
    psi[(1usize << n) - 1] = cre(T::one());
    AtomicState::from_amplitudes(n, &psi)
}

/// Fisher curve with its maximum and reference values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    #[serde(skip)]
    pub theta_grid: Vec<f64>,
    #[serde(skip)]
    pub f_values: Vec<f64>,
    pub theta_star: f64,
    #[serde(rename = "F_max")]
    pub f_max: f64,
    pub baseline_classical: f64,
    /// Maximum for the ideal equal-amplitude Dicke state of the scenario.
    pub baseline_dicke: f64,
    pub discarded_population: f64,
}

impl FisherResult {
    /// CSV with header `theta,F`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "F"])?;
        for (t, f) in self.theta_grid.iter().zip(&self.f_values) {
            w.write_record([t.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates the curve on the standard grid, its maximum and both baselines.
pub fn analyze<T: Real>(state0: &AtomicState<T>, scenario: &SensingScenario) -> Result<FisherResult> {
    let eval = FisherEvaluator::new(state0, scenario)?;
    let grid = theta_grid::<T>();
    let values = eval.curve(&grid);
    let (theta_star, f_max) = eval.maximize(&grid, &values);
    let dicke = make_dicke_state::<T>(scenario.n_atoms, scenario.excitations)?;
    let (_, f_dicke) = fisher_max(&dicke, scenario)?;
    Ok(FisherResult {
        theta_grid: grid.iter().map(|t| t.as_f64()).collect(),
        f_values: values.iter().map(|f| f.as_f64()).collect(),
        theta_star: theta_star.as_f64(),
        f_max: f_max.as_f64(),
        baseline_classical: scenario.classical_baseline(),
        baseline_dicke: f_dicke.as_f64(),
        discarded_population: state0.discarded_population().as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_full_basis, AtomLevel, ProductState};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn common(n: usize) -> SensingScenario {
        SensingScenario::new(n, n / 2, SensingCase::CommonField).unwrap()
    }

    fn gradient(n: usize) -> SensingScenario {
        SensingScenario::new(n, n / 2, SensingCase::Gradient).unwrap()
    }

    fn ket(n: usize, k: usize) -> AtomicState<f64> {
        let mut psi = vec![C::new(0.0, 0.0); 1 << n];
        psi[k] = C::new(1.0, 0.0);
        AtomicState::from_amplitudes(n, &psi).unwrap()
    }

    #[test]
    fn pi_half_on_zero() {
        let out = apply_pi_half(&ket(1, 0));
        for v in out.matrix().iter() {
            assert!((v.re - 0.5).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn four_pi_halves_restore_the_state() {
        let s = make_dicke_state::<f64>(3, 1).unwrap();
        let mut out = s.clone();
        for _ in 0..4 {
            out = apply_pi_half(&out);
        }
        for (a, b) in out.matrix().iter().zip(s.matrix().iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn pi_half_leaves_mixed_state() {
        let s = AtomicState::<f64>::maximally_mixed(3);
        let out = apply_pi_half(&s);
        for (a, b) in out.matrix().iter().zip(s.matrix().iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_phase_is_identity() {
        let s = make_dicke_state::<f64>(4, 2).unwrap();
        assert_eq!(apply_phase(&s, &common(4), 0.0).unwrap(), s);
    }

    #[test]
    fn full_turn_keeps_populations() {
        let s = make_dicke_state::<f64>(3, 1).unwrap();
        let out = apply_phase(&s, &SensingScenario::new(3, 1, SensingCase::CommonField).unwrap(), TAU).unwrap();
        assert_eq!(outcome_probabilities(&out), outcome_probabilities(&s));
    }

    /// Ramsey fringe by explicit 2x2 algebra: <sigma_x> = cos(theta).
    #[test]
    fn single_qubit_ramsey_fringe() {
        let scen = SensingScenario::new(1, 0, SensingCase::CommonField).unwrap();
        let plus = apply_pi_half(&ket(1, 0));
        for k in 0..12 {
            let theta = k as f64 * 0.5;
            let r = apply_phase(&plus, &scen, theta).unwrap();
            let sx = 2.0 * r.matrix()[(0, 1)].re;
            assert!((sx - theta.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_gradient_rejected() {
        assert!(matches!(SensingScenario::new(3, 1, SensingCase::Gradient), Err(Error::OddAtomCount(3))));
        assert!(apply_phase(&ket(2, 0), &common(4), 0.1).is_err());
    }

    #[test]
    fn outcome_probabilities_examples() {
        assert_eq!(outcome_probabilities(&ket(2, 1)), vec![0.0, 1.0, 0.0, 0.0]);
        let mixed = outcome_probabilities(&AtomicState::<f64>::maximally_mixed(2));
        assert!(mixed.iter().all(|p| (p - 0.25).abs() < 1e-15));
        let bell = outcome_probabilities(&make_dicke_state::<f64>(2, 1).unwrap());
        for (p, e) in bell.iter().zip([0.0, 0.5, 0.5, 0.0]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn dicke_amplitudes() {
        let s = make_dicke_state::<f64>(4, 2).unwrap();
        let nz: Vec<_> = (0..16).filter(|&k| s.matrix()[(k, k)].re > 0.0).collect();
        assert_eq!(nz.len(), 6);
        for &k in &nz {
            assert!((s.matrix()[(k, k)].re - 1.0 / 6.0).abs() < 1e-15);
        }
        for n in 1..=10 {
            assert!((make_dicke_state::<f64>(n, n / 2).unwrap().trace() - 1.0).abs() < 1e-12);
        }
        assert!(make_dicke_state::<f64>(3, 4).is_err());
    }

    #[test]
    fn single_qubit_shot_noise() {
        let scen = SensingScenario::new(1, 0, SensingCase::CommonField).unwrap();
        for k in 0..20 {
            let f = fisher(&ket(1, 0), &scen, 0.1 + k as f64 * 0.3).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "{f}");
        }
    }

    #[test]
    fn product_state_baselines() {
        for n in [2, 4, 6] {
            let s = make_classical_state::<f64>(n).unwrap();
            let (_, f1) = fisher_max(&s, &common(n)).unwrap();
            let (_, f2) = fisher_max(&s, &gradient(n)).unwrap();
            assert!((f1 - n as f64).abs() < 1e-9 * n as f64);
            assert!((f2 - n as f64 / 4.0).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn dicke_common_field_quadratic_scaling() {
        for n in [2usize, 4, 6] {
            let s = make_dicke_state::<f64>(n, n / 2).unwrap();
            let f = fisher(&s, &common(n), 0.05).unwrap();
            let expected = n as f64 + 0.5 * (n * n) as f64;
            assert!((f - expected).abs() < 0.05 * expected, "N={n}: {f}");
        }
        let (_, f4) = fisher_max(&make_dicke_state::<f64>(4, 2).unwrap(), &common(4)).unwrap();
        assert!(f4 >= 12.0 - 1e-9);
    }

    #[test]
    fn fisher_curve_oscillates() {
        let s = make_dicke_state::<f64>(4, 2).unwrap();
        let mut mixed_state = s.matrix().clone() * C::new(0.8, 0.0);
        mixed_state[(3, 3)] += C::new(0.2, 0.0);
        let s = AtomicState::from_matrix(4, mixed_state).unwrap();
        let r = analyze(&s, &common(4)).unwrap();
        let lo = r.f_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.f_values.iter().cloned().fold(0.0, f64::max);
        assert!(hi - lo > 0.1);
        assert!(r.f_max >= hi);
    }

    #[test]
    fn reduce_pure_ground_state() {
        let basis = build_full_basis(2, 1).unwrap();
        let i = basis.index_of(&ProductState::new(vec![AtomLevel::G0, AtomLevel::G0], 0)).unwrap();
        let q = reduce_to_qubits(&DensityMatrix::<f64>::pure(basis.dim(), i), &basis).unwrap();
        assert_eq!(q.matrix()[(0, 0)], C::new(1.0, 0.0));
        assert_eq!(q.discarded_population(), 0.0);
    }

    #[test]
    fn reduce_discards_excited_component() {
        let basis = build_full_basis(2, 1).unwrap();
        let i = basis.index_of(&ProductState::new(vec![AtomLevel::E, AtomLevel::G1], 0)).unwrap();
        let q = reduce_to_qubits(&DensityMatrix::<f64>::pure(basis.dim(), i), &basis).unwrap();
        assert_eq!(q.trace(), 0.0);
        assert_eq!(q.discarded_population(), 1.0);
    }

    #[test]
    fn reduce_traces_out_cavity() {
        let basis = build_full_basis(2, 1).unwrap();
        let a = basis.index_of(&ProductState::new(vec![AtomLevel::G0, AtomLevel::G1], 0)).unwrap();
        let b = basis.index_of(&ProductState::new(vec![AtomLevel::G0, AtomLevel::G1], 1)).unwrap();
        let mut psi = vec![C::new(0.0f64, 0.0); basis.dim()];
        psi[a] = C::new(1.0, 0.0);
        psi[b] = C::new(1.0, 0.0);
        let q = reduce_to_qubits(&DensityMatrix::<f64>::from_state_vector(&psi), &basis).unwrap();
        assert!((q.trace() - 1.0).abs() < 1e-15);
        assert!((q.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_outcomes_are_skipped() {
        assert_eq!(fisher_sum(&[0.0, 1.0], &[0.0, 0.0]), 0.0);
        assert_eq!(fisher_sum(&[1e-14, 0.5], &[1e-3, 1.0]), 1e-6 / 1e-12 + 2.0);
    }

    #[test]
    fn result_exports() {
        let r = analyze(&make_classical_state::<f64>(2).unwrap(), &common(2)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,F\n"));
        assert_eq!(text.lines().count(), THETA_GRID_POINTS + 1);
        let js = r.summary_json().unwrap();
        assert!(js.contains("\"F_max\"") && js.contains("baseline_dicke"));
        assert!((r.baseline_dicke - 4.0).abs() < 1e-6);
    }

    fn random_state(n: usize, seed: u64) -> AtomicState<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let a = DMatrix::from_fn(d, d, |_, _| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let tr = m.trace();
        AtomicState::from_matrix(n, m / tr).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn probabilities_sum_to_trace(seed in 0u64..1000, theta in 0.0f64..TAU, n in 1usize..5) {
            let s = random_state(n, seed);
            let scen = SensingScenario::new(n, 0, SensingCase::CommonField).unwrap();
            let p = FisherEvaluator::new(&s, &scen).unwrap().probabilities(theta);
            prop_assert!((p.iter().sum::<f64>() - s.trace()).abs() < 1e-10);
            prop_assert!(fisher(&s, &scen, theta).unwrap() >= 0.0);
        }

        #[test]
        fn common_field_is_periodic(seed in 0u64..1000, theta in 0.0f64..PI) {
            let s = random_state(3, seed);
            let scen = SensingScenario::new(3, 1, SensingCase::CommonField).unwrap();
            let a = fisher(&s, &scen, theta).unwrap();
            let b = fisher(&s, &scen, theta + TAU).unwrap();
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a));
        }
    }
}
