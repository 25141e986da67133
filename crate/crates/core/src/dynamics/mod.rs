//! Rotating-frame Hamiltonian, collapse operators and Lindblad propagation
//! with piecewise-constant, noisy controls.
//!
//! Rates and frequencies are angular (rad/us) and time is in microseconds.

mod integrator;
mod liouvillian;

pub use integrator::{DormandPrince, IntegratorOptions, StepStats};
pub use liouvillian::Liouvillian;

use nalgebra::{DMatrix, RealField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, lift_atom_cavity_sparse, lift_atom_sparse, transition, AtomLevel, Basis};
use crate::operator::{dagger, OperatorMatrix, SparseOperator};
use crate::pulse::DigitizedPulse;
use crate::scalar::{cre, czero, Real, C};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PhysicalParams<T> {
    /// Atom-cavity coupling.
    pub g0: T,
    /// Cavity field decay rate.
    pub kappa: T,
    /// Decay rate `|e> -> |0>`.
    pub gamma0: T,
    /// Decay rate `|e> -> |1>`.
    pub gamma1: T,
    /// Standard deviation of the excited-state detuning noise.
    #[serde(rename = "sigma_Delta")]
    pub sigma_excited: T,
    /// Standard deviation of the two-photon detuning noise.
    #[serde(rename = "sigma_delta")]
    pub sigma_two_photon: T,
}

impl<T: Real> Default for PhysicalParams<T> {
    fn default() -> Self {
        Self {
            g0: T::lit(4.0),
            kappa: T::lit(0.1),
            gamma0: T::lit(5.75 / 2.0),
            gamma1: T::lit(5.75 / 2.0),
            sigma_excited: T::lit(1.0),
            sigma_two_photon: T::lit(0.01),
        }
    }
}

impl<T: Real> PhysicalParams<T> {
    pub fn noiseless(mut self) -> Self {
        self.sigma_excited = T::zero();
        self.sigma_two_photon = T::zero();
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_excited == T::zero() && self.sigma_two_photon == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g0", self.g0),
            ("kappa", self.kappa),
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("sigma_Delta", self.sigma_excited),
            ("sigma_delta", self.sigma_two_photon),
        ];
        for (name, v) in fields {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Controls and detunings held constant over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlSample<T> {
    pub omega1: T,
    pub omega2: T,
    pub phi: T,
    /// One-photon detuning of `|e>`.
    pub excited_detuning: T,
    /// Two-photon detuning of `|1>`.
    pub two_photon_detuning: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Beam {
    One,
    Two,
}

/// Which control beam drives each atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Addressing {
    beams: Vec<Beam>,
}

impl Addressing {
    /// First `ceil(N/2)` atoms on beam one, the rest on beam two.
    pub fn halves(n_atoms: usize) -> Self {
        let first = n_atoms.div_ceil(2);
        Self { beams: (0..n_atoms).map(|a| if a < first { Beam::One } else { Beam::Two }).collect() }
    }

    pub fn from_beams(beams: Vec<Beam>) -> Self {
        Self { beams }
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }
}

/// Control-independent pieces of the Hamiltonian over one basis.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms<T: Real> {
    dim: usize,
    ones: Vec<T>,
    excited: Vec<T>,
    /// `sum_A |0_A><e_A|` over beam-one atoms
    lower1: Vec<(usize, usize, C<T>)>,
    lower2: Vec<(usize, usize, C<T>)>,
    /// `g0 sqrt(n+1) |1, n+1><e, n| + h.c.`
    cavity: Vec<(usize, usize, C<T>)>,
}

impl<T: Real> HamiltonianTerms<T> {
    pub fn new(basis: &Basis, g0: T, addressing: &Addressing) -> Result<Self> {
        let n = basis.n_atoms();
        if addressing.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: addressing.len() });
        }
        let count = |level| {
            basis.states().iter().map(|s| T::from_usize_lossy(s.count(level))).collect::<Vec<T>>()
        };
        let lower = transition::<T>(AtomLevel::G0, AtomLevel::E);
        let mut lower1 = SparseOperator::new(basis.dim());
        let mut lower2 = SparseOperator::new(basis.dim());
        let mut cav = SparseOperator::new(basis.dim());
        let a_dag = dagger(&annihilation::<T>(basis.n_max()));
        let up_cavity = transition::<T>(AtomLevel::G1, AtomLevel::E);
        for (atom, beam) in addressing.beams().iter().enumerate() {
            let op = lift_atom_sparse(&lower, atom, basis)?;
            match beam {
                Beam::One => lower1.add_scaled(&op, cre(T::one())),
                Beam::Two => lower2.add_scaled(&op, cre(T::one())),
            }
            cav.add_scaled(&lift_atom_cavity_sparse(&up_cavity, &a_dag, atom, basis)?, cre(g0));
        }
        let cav_h = cav.adjoint();
        cav.add_scaled(&cav_h, cre(T::one()));
        Ok(Self {
            dim: basis.dim(),
            ones: count(AtomLevel::G1),
            excited: count(AtomLevel::E),
            lower1: lower1.compressed().entries().to_vec(),
            lower2: lower2.compressed().entries().to_vec(),
            cavity: cav.compressed().entries().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hermitian Hamiltonian for one control sample. Diagonal entries come first.
    pub fn assemble(&self, sample: &ControlSample<T>) -> SparseOperator<T> {
        let diag = vec![czero(); self.dim];
        SparseOperator::from_entries(self.dim, self.entries_with_diagonal(sample, diag))
    }

    /// Hamiltonian entries plus an extra diagonal (used for the decay part of `H_eff`).
    fn entries_with_diagonal(&self, sample: &ControlSample<T>, mut diag: Vec<C<T>>) -> Vec<(usize, usize, C<T>)> {
        for (i, d) in diag.iter_mut().enumerate() {
            *d += cre(sample.two_photon_detuning * self.ones[i] + sample.excited_detuning * self.excited[i]);
        }
        let mut out: Vec<(usize, usize, C<T>)> = diag
            .into_iter()
            .enumerate()
            .filter(|(_, v)| v.re != T::zero() || v.im != T::zero())
            .map(|(i, v)| (i, i, v))
            .collect();
        let om1 = cre(sample.omega1);
        let om2 = C::from_polar(sample.omega2, sample.phi);
        for (terms, om) in [(&self.lower1, om1), (&self.lower2, om2)] {
            if om.re == T::zero() && om.im == T::zero() {
                continue;
            }
            for &(r, c, v) in terms {
                out.push((r, c, v * om));
                out.push((c, r, (v * om).conj()));
            }
        }
        out.extend_from_slice(&self.cavity);
        out
    }
}

pub fn build_hamiltonian<T: Real>(
    sample: &ControlSample<T>,
    params: &PhysicalParams<T>,
    basis: &Basis,
    addressing: &Addressing,
) -> Result<OperatorMatrix<T>> {
    Ok(HamiltonianTerms::new(basis, params.g0, addressing)?.assemble(sample).to_dense())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// Spontaneous decay of `atom` from `|e>` into `to`.
    Atom { atom: usize, to: AtomLevel },
    Cavity,
}

#[derive(Clone, Debug)]
pub struct CollapseOperator<T: Real> {
    pub channel: Channel,
    pub rate: T,
    pub operator: SparseOperator<T>,
}

impl<T: Real> CollapseOperator<T> {
    pub fn matrix(&self) -> OperatorMatrix<T> {
        self.operator.to_dense()
    }
}

/// `[sigma_{0,0}, sigma_{0,1}, sigma_{1,0}, ..., a]` with rates `gamma0`,
/// `gamma1` and `kappa`; the dissipator is `rate (L rho L^+ - {L^+ L, rho}/2)`.
pub fn collapse_operators<T: Real>(params: &PhysicalParams<T>, basis: &Basis) -> Result<Vec<CollapseOperator<T>>> {
    let mut out = Vec::with_capacity(2 * basis.n_atoms() + 1);
    for atom in 0..basis.n_atoms() {
        for (to, rate) in [(AtomLevel::G0, params.gamma0), (AtomLevel::G1, params.gamma1)] {
            out.push(CollapseOperator {
                channel: Channel::Atom { atom, to },
                rate,
                operator: lift_atom_sparse(&transition(to, AtomLevel::E), atom, basis)?,
            });
        }
    }
    out.push(CollapseOperator {
        channel: Channel::Cavity,
        rate: params.kappa,
        operator: crate::hilbert::lift_cavity_sparse(&annihilation(basis.n_max()), basis)?,
    });
    Ok(out)
}

/// Complex Hermitian matrix over a basis, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_matrix(matrix: DMatrix<C<T>>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(Self { matrix })
    }

    /// `|i><i|`
    pub fn pure(dim: usize, index: usize) -> Self {
        let mut matrix = DMatrix::from_element(dim, dim, czero());
        matrix[(index, index)] = cre(T::one());
        Self { matrix }
    }

    /// `|psi><psi|` for an unnormalised vector.
    pub fn from_state_vector(psi: &[C<T>]) -> Self {
        let norm: T = psi.iter().map(|z| z.norm_sqr()).sum();
        let d = psi.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / cre(norm));
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = T::one() / T::from_usize_lossy(dim);
        Self { matrix: DMatrix::from_fn(dim, dim, |i, j| if i == j { cre(w) } else { czero() }) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn as_slice(&self) -> &[C<T>] {
        self.matrix.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [C<T>] {
        self.matrix.as_mut_slice()
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.matrix[(row, col)]
    }

    pub fn population(&self, i: usize) -> T {
        self.matrix[(i, i)].re
    }

    pub fn trace(&self) -> C<T> {
        self.matrix.trace()
    }

    /// `Tr(rho^2)`, assuming Hermiticity.
    pub fn purity(&self) -> T {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> T {
        OperatorMatrix::from_matrix(self.matrix.clone()).hermiticity_defect()
    }

    /// Replaces `rho` by `(rho + rho^dagger) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        let half = T::lit(0.5);
        for j in 0..n {
            for i in 0..j {
                let v = (self.matrix[(i, j)] + self.matrix[(j, i)].conj()) * half;
                self.matrix[(i, j)] = v;
                self.matrix[(j, i)] = v.conj();
            }
            self.matrix[(j, j)].im = T::zero();
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.matrix *= cre(factor);
    }

    pub fn add_assign(&mut self, other: &DensityMatrix<T>) {
        self.matrix += &other.matrix;
    }

    pub fn to_operator(&self) -> OperatorMatrix<T> {
        OperatorMatrix::from_matrix(self.matrix.clone())
    }
}

impl<T: Real + RealField> DensityMatrix<T> {
    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> T {
        let h = (&self.matrix + dagger(&self.matrix)) * cre(T::lit(0.5));
        h.symmetric_eigenvalues().iter().copied().fold(<T as num_traits::Float>::infinity(), |a, b| {
            num_traits::Float::min(a, b)
        })
    }
}

/// Dense reference generator `-i[H, rho] + sum rate (L rho L^+ - {L^+ L, rho}/2)`.
pub fn lindblad_rhs<T: Real>(
    rho: &DensityMatrix<T>,
    hamiltonian: &OperatorMatrix<T>,
    collapse: &[CollapseOperator<T>],
) -> Result<OperatorMatrix<T>> {
    let d = rho.dim();
    if hamiltonian.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: hamiltonian.dim() });
    }
    let r = rho.matrix();
    let h = hamiltonian.matrix();
    let mi = C::new(T::zero(), -T::one());
    let mut out = (h * r - r * h) * mi;
    for c in collapse {
        if c.operator.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: c.operator.dim() });
        }
        let l = c.matrix().into_matrix();
        let ld = dagger(&l);
        let ldl = &ld * &l;
        let term = &l * r * &ld - (&ldl * r + r * &ldl) * cre(T::lit(0.5));
        out += term * cre(c.rate);
    }
    Ok(OperatorMatrix::from_matrix(out))
}

/// Zeroes every off-diagonal element that touches a state outside the target
/// manifold (qubit states with `m` ones and no photon).
pub fn zero_spurious_coherences<T: Real>(rho: &DensityMatrix<T>, basis: &Basis, m: usize) -> DensityMatrix<T> {
    let mut keep = vec![false; basis.dim()];
    for i in basis.target_indices(m) {
        keep[i] = true;
    }
    let d = rho.dim();
    let mut out = rho.clone();
    for j in 0..d {
        for i in 0..d {
            if i != j && !(keep[i] && keep[j]) {
                out.matrix[(i, j)] = czero();
            }
        }
    }
    out
}

/// Seeded Lindblad propagation over a fixed basis and parameter set.
#[derive(Clone, Debug)]
pub struct Propagator<'b, T: Real> {
    basis: &'b Basis,
    params: PhysicalParams<T>,
    terms: HamiltonianTerms<T>,
    /// diagonal of `-(i/2) sum rate L^+ L`
    decay_diagonal: Vec<C<T>>,
    decay_offdiagonal: Vec<(usize, usize, C<T>)>,
    jumps: Vec<Vec<(usize, usize, C<T>)>>,
    options: IntegratorOptions<T>,
}

impl<'b, T: Real> Propagator<'b, T> {
    pub fn new(basis: &'b Basis, params: &PhysicalParams<T>, addressing: &Addressing) -> Result<Self> {
        params.validate()?;
        let terms = HamiltonianTerms::new(basis, params.g0, addressing)?;
        let d = basis.dim();
        let mut decay = SparseOperator::new(d);
        let mut jumps = Vec::new();
        for c in collapse_operators(params, basis)? {
            if c.rate == T::zero() {
                continue;
            }
            decay.add_scaled(&c.operator.gram(), C::new(T::zero(), -c.rate * T::lit(0.5)));
            jumps.push(c.operator.scaled(cre(c.rate.sqrt())).compressed().entries().to_vec());
        }
        let mut decay_diagonal = vec![czero(); d];
        let mut decay_offdiagonal = Vec::new();
        for &(r, c, v) in decay.compressed().entries() {
            if r == c {
                decay_diagonal[r] += v;
            } else {
                decay_offdiagonal.push((r, c, v));
            }
        }
        Ok(Self {
            basis,
            params: params.clone(),
            terms,
            decay_diagonal,
            decay_offdiagonal,
            jumps,
            options: IntegratorOptions::default(),
        })
    }

    pub fn with_options(mut self, options: IntegratorOptions<T>) -> Self {
        self.options = options;
        self
    }

    pub fn basis(&self) -> &Basis {
        self.basis
    }

    pub fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    /// Sparse generator for one control sample.
    pub fn liouvillian(&self, sample: &ControlSample<T>) -> Liouvillian<T> {
        Liouvillian::from_parts(self.basis.dim(), self.effective_hamiltonian(sample), self.jumps.clone())
    }

    fn effective_hamiltonian(&self, sample: &ControlSample<T>) -> Vec<(usize, usize, C<T>)> {
        let mut e = self.terms.entries_with_diagonal(sample, self.decay_diagonal.clone());
        e.extend_from_slice(&self.decay_offdiagonal);
        e
    }

    pub fn propagate(&self, rho0: &DensityMatrix<T>, pulse: &DigitizedPulse<T>, noise_seed: u64) -> Result<DensityMatrix<T>> {
        self.propagate_observed(rho0, pulse, noise_seed, 0, |_, _, _| {})
    }

    /// Like [`propagate`](Self::propagate) on RNG stream `stream`, calling
    /// `observer(step, t, rho)` after every control step.
    pub fn propagate_observed<F>(
        &self,
        rho0: &DensityMatrix<T>,
        pulse: &DigitizedPulse<T>,
        noise_seed: u64,
        stream: u64,
        mut observer: F,
    ) -> Result<DensityMatrix<T>>
    where
        F: FnMut(usize, T, &DensityMatrix<T>),
    {
        let d = self.basis.dim();
        if rho0.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
        }
        let mut rho = rho0.clone();
        if pulse.is_empty() {
            return Ok(rho);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        rng.set_stream(stream);
        let mut lv = Liouvillian::from_parts(d, Vec::new(), self.jumps.clone());
        let mut solver = DormandPrince::new(d * d, self.options);
        for (i, step) in pulse.steps.iter().enumerate() {
            let z_excited: f64 = rng.sample(StandardNormal);
            let z_two_photon: f64 = rng.sample(StandardNormal);
            let sample = ControlSample {
                omega1: step.omega1,
                omega2: step.omega2,
                phi: step.phi,
                excited_detuning: self.params.sigma_excited * T::lit(z_excited),
                two_photon_detuning: self.params.sigma_two_photon * T::lit(z_two_photon),
            };
            lv.set_effective_hamiltonian(self.effective_hamiltonian(&sample));
            let (t0, t1) = pulse.interval(i);
            solver.integrate(|y, dy| lv.apply(y, dy), rho.as_mut_slice(), t0, t1)?;
            rho.symmetrize();
            observer(i, t1, &rho);
        }
        Ok(rho)
    }

    /// Mean final state over `realizations` independent noise streams. A
    /// noiseless parameter set is propagated once.
    pub fn propagate_averaged(
        &self,
        rho0: &DensityMatrix<T>,
        pulse: &DigitizedPulse<T>,
        noise_seed: u64,
        realizations: usize,
    ) -> Result<DensityMatrix<T>> {
        let runs = if self.params.is_noiseless() { 1 } else { realizations.max(1) };
        let mut acc = self.propagate_observed(rho0, pulse, noise_seed, 0, |_, _, _| {})?;
        for r in 1..runs {
            acc.add_assign(&self.propagate_observed(rho0, pulse, noise_seed, r as u64, |_, _, _| {})?);
        }
        acc.scale(T::one() / T::from_usize_lossy(runs));
        Ok(acc)
    }
}

/// One seeded propagation with the default half/half beam addressing.
pub fn propagate<T: Real>(
    rho0: &DensityMatrix<T>,
    pulse: &DigitizedPulse<T>,
    params: &PhysicalParams<T>,
    noise_seed: u64,
    basis: &Basis,
) -> Result<DensityMatrix<T>> {
    Propagator::new(basis, params, &Addressing::halves(basis.n_atoms()))?.propagate(rho0, pulse, noise_seed)
}

#[cfg(test)]
mod tests;
