//! Sparse Lindblad generator acting on column-major vectorised density matrices.

use nalgebra::DMatrix;

use crate::operator::SparseOperator;
use crate::scalar::{czero, Real, C};

/// `d rho/dt = -i (H_eff rho - rho H_eff^dagger) + sum_k L_k rho L_k^dagger`
/// with `H_eff = H - (i/2) sum_k L_k^dagger L_k`.
///
/// Jump operators are stored already multiplied by the square root of their rate.
#[derive(Clone, Debug)]
pub struct Liouvillian<T: Real> {
    dim: usize,
    heff: Vec<(usize, usize, C<T>)>,
    jumps: Vec<Vec<(usize, usize, C<T>)>>,
}

impl<T: Real> Liouvillian<T> {
    /// `jumps` holds `(L, rate)` pairs.
    pub fn new(hamiltonian: &SparseOperator<T>, jumps: &[(&SparseOperator<T>, T)]) -> Self {
        let dim = hamiltonian.dim();
        let mut heff = hamiltonian.clone();
        let mut scaled = Vec::with_capacity(jumps.len());
        for &(l, rate) in jumps {
            debug_assert_eq!(l.dim(), dim);
            if rate == T::zero() {
                continue;
            }
            heff.add_scaled(&l.gram(), C::new(T::zero(), -rate * T::lit(0.5)));
            scaled.push(l.scaled(C::new(rate.sqrt(), T::zero())).compressed().entries().to_vec());
        }
        Self::from_parts(dim, heff.compressed().entries().to_vec(), scaled)
    }

    /// Assembles from a precomputed effective Hamiltonian and pre-scaled jumps.
    pub fn from_parts(
        dim: usize,
        heff: Vec<(usize, usize, C<T>)>,
        jumps: Vec<Vec<(usize, usize, C<T>)>>,
    ) -> Self {
        Self { dim, heff, jumps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Replaces the effective Hamiltonian, keeping the jump operators.
    pub fn set_effective_hamiltonian(&mut self, heff: Vec<(usize, usize, C<T>)>) {
        self.heff = heff;
    }

    /// Writes the time derivative of `rho` into `out`; both are `dim * dim`
    /// column-major buffers.
    pub fn apply(&self, rho: &[C<T>], out: &mut [C<T>]) {
        let d = self.dim;
        debug_assert_eq!(rho.len(), d * d);
        debug_assert_eq!(out.len(), d * d);
        out.fill(czero());

        // -i H_eff rho, one column at a time
        for j in 0..d {
            let col = &rho[j * d..(j + 1) * d];
            let dst = &mut out[j * d..(j + 1) * d];
            for &(r, c, v) in &self.heff {
                let p = v * col[c];
                dst[r] += C::new(p.im, -p.re);
            }
        }
        // +i rho H_eff^dagger: column r receives i conj(H_rc) rho[:, c]
        for &(r, c, v) in &self.heff {
            let w = C::new(v.im, v.re);
            let src = &rho[c * d..(c + 1) * d];
            let dst = &mut out[r * d..(r + 1) * d];
            for i in 0..d {
                dst[i] += w * src[i];
            }
        }
        for l in &self.jumps {
            for &(r2, c2, v2) in l {
                let v2c = v2.conj();
                for &(r1, c1, v1) in l {
                    out[r1 + r2 * d] += v1 * rho[c1 + c2 * d] * v2c;
                }
            }
        }
    }

    /// Dense `d^2 x d^2` superoperator acting on column-major `vec(rho)`.
    pub fn to_superoperator(&self) -> DMatrix<C<T>> {
        let n = self.dim * self.dim;
        let mut s = DMatrix::from_element(n, n, czero());
        let mut e = vec![czero(); n];
        let mut out = vec![czero(); n];
        for k in 0..n {
            e[k] = C::new(T::one(), T::zero());
            self.apply(&e, &mut out);
            for (i, v) in out.iter().enumerate() {
                s[(i, k)] = *v;
            }
            e[k] = czero();
        }
        s
    }
}
