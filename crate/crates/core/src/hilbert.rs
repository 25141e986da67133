//! Atom-cavity product space: basis enumeration and operator lifting.
//!
//! Each atom is a three-level Lambda system with two ground levels `|0>`,
//! `|1>` and a shared excited level `|e>`; the cavity is a single mode cut off
//! at `n_max` photons. States are ordered lexicographically over the atom
//! levels (`0 < 1 < e`, atom 0 most significant) with the photon number
//! varying fastest.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, SparseOperator};
use crate::scalar::{cre, czero, Real, C};

/// Default ceiling on the number of basis states.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    /// Qubit level `|0>`, driven to `|e>` by the control beams.
    G0,
    /// Qubit level `|1>`, coupled to `|e>` by the cavity.
    G1,
    /// Shared excited level `|e>`.
    E,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::G0, AtomLevel::G1, AtomLevel::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_qubit(self) -> bool {
        self != AtomLevel::E
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomLevel::G0 => "0",
            AtomLevel::G1 => "1",
            AtomLevel::E => "e",
        })
    }
}

/// `|l_1 l_2 ... l_N> (x) |n>`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub atoms: Vec<AtomLevel>,
    pub photons: usize,
}

impl ProductState {
    pub fn new(atoms: Vec<AtomLevel>, photons: usize) -> Self {
        Self { atoms, photons }
    }

    pub fn count(&self, level: AtomLevel) -> usize {
        self.atoms.iter().filter(|&&l| l == level).count()
    }

    /// True when every atom sits in a qubit level.
    pub fn is_qubit(&self) -> bool {
        self.atoms.iter().all(|l| l.is_qubit())
    }

    /// Computational-basis index of the atomic part, atom 0 as the most
    /// significant bit and `|1>` as bit value 1. `None` if any atom is excited.
    pub fn qubit_index(&self) -> Option<usize> {
        let mut k = 0usize;
        for &l in &self.atoms {
            k <<= 1;
            match l {
                AtomLevel::G0 => {}
                AtomLevel::G1 => k |= 1,
                AtomLevel::E => return None,
            }
        }
        Some(k)
    }

    fn with_atom(&self, atom: usize, level: AtomLevel) -> Self {
        let mut s = self.clone();
        s.atoms[atom] = level;
        s
    }

    fn with_photons(&self, photons: usize) -> Self {
        Self { atoms: self.atoms.clone(), photons }
    }
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for l in &self.atoms {
            write!(f, "{l}")?;
        }
        write!(f, ",{}>", self.photons)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Full,
    /// Excitation-number truncation around `m` delocalised excitations.
    Truncated { excitations: usize },
}

/// The five state families kept by the truncated basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// (N-m) zeros, m ones, empty cavity: the Dicke-like target manifold.
    Target,
    /// (N-m) zeros, (m-1) ones, one excited atom, empty cavity.
    ExcitedBelow,
    /// (N-m-1) zeros, m ones, one excited atom, empty cavity.
    ExcitedAbove,
    /// (N-m-1) zeros, (m+1) ones, one cavity photon.
    Photon,
    /// (N-m-1) zeros, (m+1) ones, empty cavity.
    Relaxed,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Target,
        Family::ExcitedBelow,
        Family::ExcitedAbove,
        Family::Photon,
        Family::Relaxed,
    ];

    /// Level counts `[#0, #1, #e]` and photon number of this family.
    fn signature(self, n_atoms: usize, m: usize) -> ([usize; 3], usize) {
        match self {
            Family::Target => ([n_atoms - m, m, 0], 0),
            Family::ExcitedBelow => ([n_atoms - m, m - 1, 1], 0),
            Family::ExcitedAbove => ([n_atoms - m - 1, m, 1], 0),
            Family::Photon => ([n_atoms - m - 1, m + 1, 0], 1),
            Family::Relaxed => ([n_atoms - m - 1, m + 1, 0], 0),
        }
    }

    /// Classifies a state against excitation number `m`.
    pub fn of(state: &ProductState, m: usize) -> Option<Family> {
        let n = state.atoms.len();
        if m == 0 || m >= n {
            return None;
        }
        let counts = [
            state.count(AtomLevel::G0),
            state.count(AtomLevel::G1),
            state.count(AtomLevel::E),
        ];
        Family::ALL
            .into_iter()
            .find(|f| f.signature(n, m) == (counts, state.photons))
    }
}

/// Ordered enumeration of product states with its inverse index.
#[derive(Clone, Debug)]
pub struct Basis {
    n_atoms: usize,
    n_max: usize,
    kind: BasisKind,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
}

impl Basis {
    fn from_states(n_atoms: usize, n_max: usize, kind: BasisKind, mut states: Vec<ProductState>) -> Self {
        states.sort();
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self { n_atoms, n_max, kind, states, index }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &ProductState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &ProductState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Family of state `i` relative to excitation number `m`.
    pub fn family(&self, i: usize, m: usize) -> Option<Family> {
        Family::of(&self.states[i], m)
    }

    /// Indices of the target manifold: qubit states with `m` ones and no photon.
    pub fn target_indices(&self, m: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| {
                let s = &self.states[i];
                s.photons == 0 && s.is_qubit() && s.count(AtomLevel::G1) == m
            })
            .collect()
    }

    /// `|0^(N-m) 1^m> (x) |0_c>`
    pub fn localized_state(&self, m: usize) -> Option<usize> {
        if m > self.n_atoms {
            return None;
        }
        let atoms = (0..self.n_atoms)
            .map(|a| if a < self.n_atoms - m { AtomLevel::G0 } else { AtomLevel::G1 })
            .collect();
        self.index_of(&ProductState::new(atoms, 0))
    }
}

/// All `3^N (n_max+1)` product states, capped at [`DEFAULT_DIMENSION_CAP`].
pub fn build_full_basis(n_atoms: usize, n_max: usize) -> Result<Basis> {
    build_full_basis_capped(n_atoms, n_max, DEFAULT_DIMENSION_CAP)
}

pub fn build_full_basis_capped(n_atoms: usize, n_max: usize, cap: usize) -> Result<Basis> {
    if n_atoms == 0 {
        return Err(Error::InvalidArgument("at least one atom is required".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("photon cutoff n_max must be at least 1".into()));
    }
    let dim = u32::try_from(n_atoms)
        .ok()
        .and_then(|n| 3usize.checked_pow(n))
        .and_then(|a| a.checked_mul(n_max + 1));
    match dim {
        Some(d) if d <= cap => {}
        Some(d) => return Err(Error::DimensionOverflow { dim: d, cap }),
        None => return Err(Error::DimensionOverflow { dim: usize::MAX, cap }),
    }
    let mut states = Vec::new();
    for atoms in arrangements_all(n_atoms) {
        for n in 0..=n_max {
            states.push(ProductState::new(atoms.clone(), n));
        }
    }
    Ok(Basis::from_states(n_atoms, n_max, BasisKind::Full, states))
}

/// The five-family excitation-number truncation around `m` excitations.
pub fn build_truncated_basis(n_atoms: usize, m: usize) -> Result<Basis> {
    build_truncated_basis_capped(n_atoms, m, DEFAULT_DIMENSION_CAP)
}

pub fn build_truncated_basis_capped(n_atoms: usize, m: usize, cap: usize) -> Result<Basis> {
    if m == 0 || m >= n_atoms {
        return Err(Error::InvalidExcitation { n_atoms, m });
    }
    let mut states = Vec::new();
    for family in Family::ALL {
        let (counts, photons) = family.signature(n_atoms, m);
        for atoms in distinct_arrangements(counts) {
            states.push(ProductState::new(atoms, photons));
        }
        if states.len() > cap {
            return Err(Error::DimensionOverflow { dim: states.len(), cap });
        }
    }
    Ok(Basis::from_states(n_atoms, 1, BasisKind::Truncated { excitations: m }, states))
}

fn arrangements_all(n: usize) -> Vec<Vec<AtomLevel>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                AtomLevel::ALL.into_iter().map(move |l| {
                    let mut p = prefix.clone();
                    p.push(l);
                    p
                })
            })
            .collect();
    }
    out
}

/// Distinct orderings of a multiset with `counts[l]` copies of level `l`,
/// in lexicographic order.
pub fn distinct_arrangements(counts: [usize; 3]) -> Vec<Vec<AtomLevel>> {
    fn rec(counts: &mut [usize; 3], prefix: &mut Vec<AtomLevel>, out: &mut Vec<Vec<AtomLevel>>) {
        if counts.iter().all(|&c| c == 0) {
            out.push(prefix.clone());
            return;
        }
        for l in AtomLevel::ALL {
            if counts[l.index()] > 0 {
                counts[l.index()] -= 1;
                prefix.push(l);
                rec(counts, prefix, out);
                prefix.pop();
                counts[l.index()] += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut c = counts;
    rec(&mut c, &mut Vec::new(), &mut out);
    out
}

/// `|to><from|` as a single-atom operator.
pub fn transition<T: Real>(to: AtomLevel, from: AtomLevel) -> Matrix3<C<T>> {
    let mut m = Matrix3::from_element(czero());
    m[(to.index(), from.index())] = cre(T::one());
    m
}

/// Cavity annihilation operator on `0..=n_max` photons.
pub fn annihilation<T: Real>(n_max: usize) -> DMatrix<C<T>> {
    let mut a = DMatrix::from_element(n_max + 1, n_max + 1, czero());
    for n in 1..=n_max {
        a[(n - 1, n)] = cre(T::from_usize_lossy(n).sqrt());
    }
    a
}

/// Sparse lift of a single-atom operator; elements leaving a truncated basis
/// are dropped (projector sandwich).
pub fn lift_atom_sparse<T: Real>(
    op: &Matrix3<C<T>>,
    atom: usize,
    basis: &Basis,
) -> Result<SparseOperator<T>> {
    if atom >= basis.n_atoms() {
        return Err(Error::InvalidArgument(format!(
            "atom index {atom} out of range for {} atoms",
            basis.n_atoms()
        )));
    }
    let mut out = SparseOperator::new(basis.dim());
    for (col, s) in basis.states().iter().enumerate() {
        let from = s.atoms[atom].index();
        for to in AtomLevel::ALL {
            let v = op[(to.index(), from)];
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            if let Some(row) = basis.index_of(&s.with_atom(atom, to)) {
                out.push(row, col, v);
            }
        }
    }
    Ok(out)
}

pub fn lift_atom_operator<T: Real>(
    op: &Matrix3<C<T>>,
    atom: usize,
    basis: &Basis,
) -> Result<OperatorMatrix<T>> {
    Ok(lift_atom_sparse(op, atom, basis)?.to_dense())
}

pub fn lift_cavity_sparse<T: Real>(op: &DMatrix<C<T>>, basis: &Basis) -> Result<SparseOperator<T>> {
    let size = basis.n_max() + 1;
    if op.nrows() != size || op.ncols() != size {
        return Err(Error::DimensionMismatch { expected: size, found: op.nrows() });
    }
    let mut out = SparseOperator::new(basis.dim());
    for (col, s) in basis.states().iter().enumerate() {
        for to in 0..size {
            let v = op[(to, s.photons)];
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            if let Some(row) = basis.index_of(&s.with_photons(to)) {
                out.push(row, col, v);
            }
        }
    }
    Ok(out)
}

/// Sparse lift of `atom_op (x) cavity_op` acting on one atom and the cavity.
pub fn lift_atom_cavity_sparse<T: Real>(
    atom_op: &Matrix3<C<T>>,
    cavity_op: &DMatrix<C<T>>,
    atom: usize,
    basis: &Basis,
) -> Result<SparseOperator<T>> {
    let size = basis.n_max() + 1;
    if cavity_op.nrows() != size || cavity_op.ncols() != size {
        return Err(Error::DimensionMismatch { expected: size, found: cavity_op.nrows() });
    }
    if atom >= basis.n_atoms() {
        return Err(Error::InvalidArgument(format!(
            "atom index {atom} out of range for {} atoms",
            basis.n_atoms()
        )));
    }
    let mut out = SparseOperator::new(basis.dim());
    for (col, s) in basis.states().iter().enumerate() {
        let from = s.atoms[atom].index();
        for to in AtomLevel::ALL {
            let va = atom_op[(to.index(), from)];
            if va.re == T::zero() && va.im == T::zero() {
                continue;
            }
            for n in 0..size {
                let v = va * cavity_op[(n, s.photons)];
                if v.re == T::zero() && v.im == T::zero() {
                    continue;
                }
                let target = ProductState { atoms: s.with_atom(atom, to).atoms, photons: n };
                if let Some(row) = basis.index_of(&target) {
                    out.push(row, col, v);
                }
            }
        }
    }
    Ok(out)
}

pub fn lift_cavity_operator<T: Real>(op: &DMatrix<C<T>>, basis: &Basis) -> Result<OperatorMatrix<T>> {
    Ok(lift_cavity_sparse(op, basis)?.to_dense())
}
