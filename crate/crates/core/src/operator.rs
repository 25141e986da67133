//! Dense and sparse complex operators over a [`Basis`](crate::hilbert::Basis).

use std::collections::BTreeMap;
use std::ops::Mul;

use nalgebra::DMatrix;

use crate::scalar::{czero, Real, C};

/// Dense complex square matrix acting on a basis of `dim()` states.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    matrix: DMatrix<C<T>>,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { matrix: DMatrix::from_element(dim, dim, czero()) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    /// Wraps a square matrix. Panics if the matrix is not square.
    pub fn from_matrix(matrix: DMatrix<C<T>>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator matrix must be square");
        Self { matrix }
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

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: dagger(&self.matrix) }
    }

    pub fn trace(&self) -> C<T> {
        self.matrix.trace()
    }

    /// Largest modulus of `A - A^dagger`.
    pub fn hermiticity_defect(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for j in 0..n {
            for i in 0..=j {
                let d = self.matrix[(i, j)] - self.matrix[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn to_sparse(&self) -> SparseOperator<T> {
        SparseOperator::from_dense(&self.matrix)
    }
}

impl<'a, T: Real> Mul<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;

    fn mul(self, rhs: &'a OperatorMatrix<T>) -> OperatorMatrix<T> {
        OperatorMatrix { matrix: &self.matrix * &rhs.matrix }
    }
}

/// Conjugate transpose.
pub fn dagger<T: Real>(m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    DMatrix::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// Coordinate-list sparse operator; duplicate entries are summed on use.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T: Real> {
    dim: usize,
    entries: Vec<(usize, usize, C<T>)>,
}

impl<T: Real> SparseOperator<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn from_entries(dim: usize, entries: Vec<(usize, usize, C<T>)>) -> Self {
        debug_assert!(entries.iter().all(|&(r, c, _)| r < dim && c < dim));
        Self { dim, entries }
    }

    pub fn from_dense(matrix: &DMatrix<C<T>>) -> Self {
        let dim = matrix.nrows();
        let mut entries = Vec::new();
        for c in 0..matrix.ncols() {
            for r in 0..dim {
                let v = matrix[(r, c)];
                if v.re != T::zero() || v.im != T::zero() {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C<T>)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn push(&mut self, row: usize, col: usize, value: C<T>) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value));
    }

    /// Appends `scale * other`.
    pub fn add_scaled(&mut self, other: &SparseOperator<T>, scale: C<T>) {
        debug_assert_eq!(self.dim, other.dim);
        self.entries.extend(other.entries.iter().map(|&(r, c, v)| (r, c, v * scale)));
    }

    pub fn scaled(&self, scale: C<T>) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * scale)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    /// Merges duplicate coordinates and drops exact zeros.
    pub fn compressed(&self) -> Self {
        let mut acc: BTreeMap<(usize, usize), C<T>> = BTreeMap::new();
        for &(r, c, v) in &self.entries {
            *acc.entry((c, r)).or_insert_with(czero) += v;
        }
        let entries = acc
            .into_iter()
            .filter(|(_, v)| v.re != T::zero() || v.im != T::zero())
            .map(|((c, r), v)| (r, c, v))
            .collect();
        Self { dim: self.dim, entries }
    }

    /// `self^dagger * self`, compressed.
    pub fn gram(&self) -> Self {
        let mut by_row: BTreeMap<usize, Vec<(usize, C<T>)>> = BTreeMap::new();
        for &(r, c, v) in &self.entries {
            by_row.entry(r).or_default().push((c, v));
        }
        let mut out = SparseOperator::new(self.dim);
        for cols in by_row.values() {
            for &(c1, v1) in cols {
                for &(c2, v2) in cols {
                    out.push(c1, c2, v1.conj() * v2);
                }
            }
        }
        out.compressed()
    }

    pub fn to_dense(&self) -> OperatorMatrix<T> {
        let mut m = DMatrix::from_element(self.dim, self.dim, czero());
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        OperatorMatrix::from_matrix(m)
    }
}
