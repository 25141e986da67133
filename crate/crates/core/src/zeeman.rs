//! Hyperfine and Zeeman structure of Rb-87 in the uncoupled `|m_I, m_J>`
//! basis, magic-field search and the atom-cavity coupling strength.
//!
//! Energies are `E/h` in MHz, fields in gauss.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::OperatorMatrix;
use crate::scalar::C;

const BUNDLED: &str = include_str!("../data/rb87.json");

/// Largest field increment between two diagonalisations while tracking labels.
pub const TRACKING_STEP_GAUSS: f64 = 5.0;
/// Overlap below which tracking gives up.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;
pub const MAGIC_TOLERANCE_GAUSS: f64 = 1e-3;
const SIMPSON_PANELS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperfineLevelConstants {
    pub nuclear_spin: f64,
    pub electronic_j: f64,
    /// Magnetic dipole constant (MHz).
    pub a_mhz: f64,
    /// Electric quadrupole constant (MHz); only used for `J > 1/2`.
    pub b_mhz: f64,
    pub g_j: f64,
    pub g_i: f64,
    pub bohr_magneton_mhz_per_gauss: f64,
}

impl HyperfineLevelConstants {
    pub fn dim(&self) -> usize {
        multiplicity(self.nuclear_spin) * multiplicity(self.electronic_j)
    }

    /// `(m_I, m_J)` of each basis index; `m_J` runs fastest.
    pub fn basis(&self) -> Vec<(f64, f64)> {
        let (ni, nj) = (multiplicity(self.nuclear_spin), multiplicity(self.electronic_j));
        (0..ni * nj)
            .map(|k| (-self.nuclear_spin + (k / nj) as f64, -self.electronic_j + (k % nj) as f64))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let half = |x: f64| x >= 0.0 && (2.0 * x).fract() == 0.0;
        if !half(self.nuclear_spin) || !half(self.electronic_j) || self.electronic_j == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "spins I = {}, J = {} must be non-negative half-integers with J > 0",
                self.nuclear_spin, self.electronic_j
            )));
        }
        if ![self.a_mhz, self.b_mhz, self.g_j, self.g_i, self.bohr_magneton_mhz_per_gauss].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite hyperfine constant".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleTransition {
    pub wavelength_m: f64,
    /// `<J||er||J'>` (C m).
    pub reduced_dipole_cm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar_js: f64,
    pub epsilon0_f_per_m: f64,
    pub speed_of_light_m_per_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomData {
    pub ground: HyperfineLevelConstants,
    pub excited: HyperfineLevelConstants,
    pub d1: DipoleTransition,
    pub constants: PhysicalConstants,
}

#[derive(Deserialize)]
struct RawLevel {
    electronic_j: f64,
    a_mhz: f64,
    b_mhz: f64,
    g_j: f64,
    g_i: f64,
}

#[derive(Deserialize)]
struct RawData {
    bohr_magneton_mhz_per_gauss: f64,
    nuclear_spin: f64,
    levels: std::collections::BTreeMap<String, RawLevel>,
    d1: DipoleTransition,
    constants: PhysicalConstants,
}

impl AtomData {
    /// Rb-87 constants shipped with the crate.
    pub fn rb87() -> Self {
        Self::from_json(BUNDLED).expect("bundled Rb-87 data parses")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawData = serde_json::from_str(s)?;
        let level = |name: &str| -> Result<HyperfineLevelConstants> {
            let l = raw
                .levels
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("atom data lacks level {name}")))?;
            let c = HyperfineLevelConstants {
                nuclear_spin: raw.nuclear_spin,
                electronic_j: l.electronic_j,
                a_mhz: l.a_mhz,
                b_mhz: l.b_mhz,
                g_j: l.g_j,
                g_i: l.g_i,
                bohr_magneton_mhz_per_gauss: raw.bohr_magneton_mhz_per_gauss,
            };
            c.validate()?;
            Ok(c)
        };
        Ok(Self { ground: level("5S1/2")?, excited: level("5P1/2")?, d1: raw.d1, constants: raw.constants })
    }
}

fn multiplicity(j: f64) -> usize {
    (2.0 * j).round() as usize + 1
}

/// `(J_z, J_+)` for spin `j` with `m` ascending.
fn spin_matrices(j: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = multiplicity(j);
    let mut jz = DMatrix::zeros(n, n);
    let mut jp = DMatrix::zeros(n, n);
    for k in 0..n {
        let m = -j + k as f64;
        jz[(k, k)] = m;
        if k + 1 < n {
            jp[(k + 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    (jz, jp)
}

struct SpinOperators {
    /// `I.J`
    dot: DMatrix<f64>,
    iz: DMatrix<f64>,
    jz: DMatrix<f64>,
}

impl SpinOperators {
    fn new(c: &HyperfineLevelConstants) -> Self {
        let (iz, ip) = spin_matrices(c.nuclear_spin);
        let (jz, jp) = spin_matrices(c.electronic_j);
        let (ni, nj) = (iz.nrows(), jz.nrows());
        let id_i = DMatrix::<f64>::identity(ni, ni);
        let id_j = DMatrix::<f64>::identity(nj, nj);
        let im = ip.transpose();
        let jm = jp.transpose();
        let dot = iz.kronecker(&jz) + (ip.kronecker(&jm) + im.kronecker(&jp)) * 0.5;
        Self { dot, iz: iz.kronecker(&id_j), jz: id_i.kronecker(&jz) }
    }

    fn hyperfine(&self, c: &HyperfineLevelConstants) -> DMatrix<f64> {
        let mut h = &self.dot * c.a_mhz;
        let (i, j) = (c.nuclear_spin, c.electronic_j);
        if c.b_mhz != 0.0 && i > 0.5 && j > 0.5 {
            let n = h.nrows();
            let id = DMatrix::<f64>::identity(n, n);
            let q = (&self.dot * &self.dot) * 3.0 + &self.dot * 1.5 - id * (i * (i + 1.0) * j * (j + 1.0));
            h += q * (c.b_mhz / (2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0)));
        }
        h
    }

    /// `dH/dB`
    fn magnetic(&self, c: &HyperfineLevelConstants) -> DMatrix<f64> {
        (&self.jz * c.g_j + &self.iz * c.g_i) * c.bohr_magneton_mhz_per_gauss
    }
}

fn real_hamiltonian(c: &HyperfineLevelConstants, b: f64) -> DMatrix<f64> {
    let ops = SpinOperators::new(c);
    ops.hyperfine(c) + ops.magnetic(c) * b
}

fn check_field(b: f64) -> Result<()> {
    if b.is_finite() && b >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("magnetic field must be finite and non-negative, got {b}")))
    }
}

/// `A I.J (+ quadrupole) + mu_B B (g_J J_z + g_I I_z)`.
pub fn hyperfine_zeeman_hamiltonian(c: &HyperfineLevelConstants, b: f64) -> Result<OperatorMatrix<f64>> {
    c.validate()?;
    check_field(b)?;
    Ok(OperatorMatrix::from_matrix(real_hamiltonian(c, b).map(|v| C::new(v, 0.0))))
}

/// `(F, m_F)`, stored doubled so half-integer spins compare exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HyperfineLabel {
    twice_f: i32,
    twice_m: i32,
}

impl HyperfineLabel {
    pub fn new(f: f64, m_f: f64) -> Self {
        Self { twice_f: (2.0 * f).round() as i32, twice_m: (2.0 * m_f).round() as i32 }
    }

    pub fn f(&self) -> f64 {
        self.twice_f as f64 / 2.0
    }

    pub fn m_f(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }
}

impl std::fmt::Display for HyperfineLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F{}_m{}", self.f(), self.m_f())
    }
}

/// Two labelled states; the transition energy is `E_upper - E_lower`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPair {
    pub upper: HyperfineLabel,
    pub lower: HyperfineLabel,
}

impl LevelPair {
    pub fn new(upper: HyperfineLabel, lower: HyperfineLabel) -> Self {
        Self { upper, lower }
    }

    /// `|2,0> - |1,-1>`, field-insensitive near 654 G.
    pub fn qubit() -> Self {
        Self::new(HyperfineLabel::new(2.0, 0.0), HyperfineLabel::new(1.0, -1.0))
    }

    /// `|2,1> - |1,-1>`, field-insensitive near 3.2 G.
    pub fn low_field() -> Self {
        Self::new(HyperfineLabel::new(2.0, 1.0), HyperfineLabel::new(1.0, -1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeemanEigenstate {
    pub energy: f64,
    /// Amplitudes over the full `|m_I, m_J>` basis.
    pub amplitudes: DVector<f64>,
    pub label: HyperfineLabel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingOptions {
    pub step_gauss: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self { step_gauss: TRACKING_STEP_GAUSS }
    }
}

/// One fixed-`m_F` block of the Hamiltonian.
struct Block {
    twice_m: i32,
    indices: Vec<usize>,
}

fn blocks(c: &HyperfineLevelConstants) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::new();
    for (k, (mi, mj)) in c.basis().into_iter().enumerate() {
        let twice_m = (2.0 * (mi + mj)).round() as i32;
        match out.iter_mut().find(|b| b.twice_m == twice_m) {
            Some(b) => b.indices.push(k),
            None => out.push(Block { twice_m, indices: vec![k] }),
        }
    }
    out.sort_by_key(|b| b.twice_m);
    out
}

fn sub_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Eigenpairs of one block, columns ordered by ascending energy.
fn diagonalize(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Block eigenstates at `b` with labels carried adiabatically from zero field.
struct TrackedBlock {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    labels: Vec<HyperfineLabel>,
}

fn track_block(
    c: &HyperfineLevelConstants,
    ops: &SpinOperators,
    block: &Block,
    b: f64,
    opts: &TrackingOptions,
) -> Result<TrackedBlock> {
    let h0 = sub_matrix(&ops.hyperfine(c), &block.indices);
    let hb = sub_matrix(&ops.magnetic(c), &block.indices);
    let f_sq = {
        let n = ops.dot.nrows();
        let (i, j) = (c.nuclear_spin, c.electronic_j);
        let full = &ops.dot * 2.0 + DMatrix::<f64>::identity(n, n) * (i * (i + 1.0) + j * (j + 1.0));
        sub_matrix(&full, &block.indices)
    };
    // at zero field F is diagonal together with H; split degeneracies with F^2
    let (_, mut vectors) = diagonalize(&h0 + &f_sq * 1e-9 * c.a_mhz.abs().max(1.0));
    let labels: Vec<HyperfineLabel> = (0..vectors.ncols())
        .map(|k| {
            let v = vectors.column(k);
            let ff = v.dot(&(&f_sq * v));
            let f = (-1.0 + (1.0 + 4.0 * ff).sqrt()) / 2.0;
            HyperfineLabel { twice_f: (2.0 * f).round() as i32, twice_m: block.twice_m }
        })
        .collect();
    let mut energies: Vec<f64> = (0..vectors.ncols()).map(|k| vectors.column(k).dot(&(&h0 * vectors.column(k)))).collect();

    let steps = if b > 0.0 { (b / opts.step_gauss).ceil().max(1.0) as usize } else { 0 };
    for s in 1..=steps {
        let field = b * s as f64 / steps as f64;
        let (vals, vecs) = diagonalize(&h0 + &hb * field);
        let n = vals.len();
        let mut taken = vec![false; n];
        let mut next = DMatrix::zeros(n, n);
        let mut next_e = vec![0.0; n];
        for k in 0..n {
            let prev = vectors.column(k);
            let (best, overlap) = (0..n)
                .filter(|&q| !taken[q])
                .map(|q| (q, vecs.column(q).dot(&prev)))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("block has free eigenvectors");
            if overlap.abs() < MIN_TRACKING_OVERLAP {
                return Err(Error::LabelTracking { overlap: overlap.abs(), field });
            }
            taken[best] = true;
            next.set_column(k, &(vecs.column(best) * overlap.signum()));
            next_e[k] = vals[best];
        }
        vectors = next;
        energies = next_e;
    }
    Ok(TrackedBlock { energies, vectors, labels })
}

fn embed(c: &HyperfineLevelConstants, block: &Block, v: nalgebra::DVectorView<'_, f64>) -> DVector<f64> {
    let mut full = DVector::zeros(c.dim());
    for (r, &i) in block.indices.iter().enumerate() {
        full[i] = v[r];
    }
    full
}

pub fn eigenstates(c: &HyperfineLevelConstants, b: f64) -> Result<Vec<ZeemanEigenstate>> {
    eigenstates_with(c, b, &TrackingOptions::default())
}

/// All eigenstates, sorted by label.
pub fn eigenstates_with(c: &HyperfineLevelConstants, b: f64, opts: &TrackingOptions) -> Result<Vec<ZeemanEigenstate>> {
    c.validate()?;
    check_field(b)?;
    let ops = SpinOperators::new(c);
    let mut out = Vec::with_capacity(c.dim());
    for block in blocks(c) {
        let t = track_block(c, &ops, &block, b, opts)?;
        for k in 0..t.labels.len() {
            out.push(ZeemanEigenstate {
                energy: t.energies[k],
                amplitudes: embed(c, &block, t.vectors.column(k)),
                label: t.labels[k],
            });
        }
    }
    out.sort_by_key(|s| s.label);
    Ok(out)
}

/// The eigenstate carrying `label` at field `b`.
pub fn labeled_state(c: &HyperfineLevelConstants, label: HyperfineLabel, b: f64) -> Result<ZeemanEigenstate> {
    c.validate()?;
    check_field(b)?;
    let ops = SpinOperators::new(c);
    let block = blocks(c)
        .into_iter()
        .find(|bl| bl.twice_m == label.twice_m)
        .ok_or(Error::UnknownLevel { f: label.f(), m_f: label.m_f() })?;
    let t = track_block(c, &ops, &block, b, &TrackingOptions::default())?;
    let k = t.labels.iter().position(|l| *l == label).ok_or(Error::UnknownLevel { f: label.f(), m_f: label.m_f() })?;
    Ok(ZeemanEigenstate { energy: t.energies[k], amplitudes: embed(c, &block, t.vectors.column(k)), label })
}

/// `E_upper - E_lower` (MHz).
pub fn transition_frequency(c: &HyperfineLevelConstants, pair: &LevelPair, b: f64) -> Result<f64> {
    Ok(labeled_state(c, pair.upper, b)?.energy - labeled_state(c, pair.lower, b)?.energy)
}

/// `d(E_upper - E_lower)/dB` (MHz/G) from the eigenvectors.
pub fn transition_slope(c: &HyperfineLevelConstants, pair: &LevelPair, b: f64) -> Result<f64> {
    let dh = SpinOperators::new(c).magnetic(c);
    let slope = |label| -> Result<f64> {
        let s = labeled_state(c, label, b)?;
        Ok(s.amplitudes.dot(&(&dh * &s.amplitudes)))
    };
    Ok(slope(pair.upper)? - slope(pair.lower)?)
}

/// Central-difference `d(E_upper - E_lower)/dB` with step `h`.
pub fn transition_slope_central(c: &HyperfineLevelConstants, pair: &LevelPair, b: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || h > b {
        return Err(Error::InvalidArgument(format!("difference step {h} G must lie in (0, B]")));
    }
    Ok((transition_frequency(c, pair, b + h)? - transition_frequency(c, pair, b - h)?) / (2.0 * h))
}

/// `|f(B + dB) - f(B)|` in Hz for the pair's transition frequency `f`.
///
/// The difference is integrated from the slope rather than taken between two
/// energies of order GHz, which would lose it to rounding.
pub fn transition_sensitivity(c: &HyperfineLevelConstants, pair: &LevelPair, b: f64, db: f64) -> Result<f64> {
    check_field(b)?;
    check_field(b + db)?;
    if db == 0.0 {
        return Ok(0.0);
    }
    let h = db / SIMPSON_PANELS as f64;
    let mut sum = 0.0;
    for k in 0..=SIMPSON_PANELS {
        let w = if k == 0 || k == SIMPSON_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * transition_slope(c, pair, b + h * k as f64)?;
    }
    Ok((sum * h / 3.0).abs() * 1e6)
}

/// Field in `range` where the pair's transition is first-order field insensitive.
pub fn find_magic_field(c: &HyperfineLevelConstants, pair: &LevelPair, range: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = range;
    check_field(lo)?;
    check_field(hi)?;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty field range [{lo}, {hi}]")));
    }
    let mut s_lo = transition_slope(c, pair, lo)?;
    let mut s_hi = transition_slope(c, pair, hi)?;
    if s_lo == 0.0 {
        return Ok(lo);
    }
    if s_hi == 0.0 {
        return Ok(hi);
    }
    if s_lo.signum() == s_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > MAGIC_TOLERANCE_GAUSS {
        let mid = 0.5 * (lo + hi);
        let s = transition_slope(c, pair, mid)?;
        if s == 0.0 {
            return Ok(mid);
        }
        if s.signum() == s_lo.signum() {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
            s_hi = s;
        }
    }
    Ok(lo - s_lo * (hi - lo) / (s_hi - s_lo))
}

/// Weight of a labelled state outside its zero-field counterpart.
pub fn admixture(c: &HyperfineLevelConstants, label: HyperfineLabel, b: f64) -> Result<f64> {
    let pure = labeled_state(c, label, 0.0)?;
    let s = labeled_state(c, label, b)?;
    Ok(1.0 - pure.amplitudes.dot(&s.amplitudes).powi(2))
}

/// Symmetric two-mirror Fabry-Perot resonator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub length_m: f64,
    pub mirror_radius_m: f64,
}

impl Cavity {
    fn check(&self) -> Result<()> {
        let (l, r) = (self.length_m, self.mirror_radius_m);
        if l > 0.0 && r > 0.0 && l < 2.0 * r {
            Ok(())
        } else {
            Err(Error::UnstableCavity { length: l, radius: r })
        }
    }

    /// Squared waist of the TEM00 mode (m^2).
    pub fn waist_squared(&self, wavelength_m: f64) -> Result<f64> {
        self.check()?;
        let (l, r) = (self.length_m, self.mirror_radius_m);
        Ok(wavelength_m / std::f64::consts::PI * (l * (2.0 * r - l)).sqrt() / 2.0)
    }

    /// `pi w0^2 L / 4`
    pub fn mode_volume(&self, wavelength_m: f64) -> Result<f64> {
        Ok(std::f64::consts::PI * self.waist_squared(wavelength_m)? * self.length_m / 4.0)
    }
}

/// `|<e| d_z |g>|` (C m) between two labelled states of a `J = 1/2 -> J' = 1/2`
/// line at field `b`, including their field-induced mixing.
pub fn transition_dipole(
    data: &AtomData,
    ground: HyperfineLabel,
    excited: HyperfineLabel,
    b: f64,
) -> Result<f64> {
    let (gc, ec) = (&data.ground, &data.excited);
    if gc.electronic_j != 0.5 || ec.electronic_j != 0.5 || gc.dim() != ec.dim() {
        return Err(Error::InvalidArgument("dipole elements implemented for J = 1/2 -> 1/2 only".into()));
    }
    let g = labeled_state(gc, ground, b)?;
    let e = labeled_state(ec, excited, b)?;
    Ok(dipole_between(data, &g.amplitudes, &e.amplitudes))
}

fn dipole_between(data: &AtomData, g: &DVector<f64>, e: &DVector<f64>) -> f64 {
    // <J' m|d_0|J m> = -(2/sqrt 3) m <J||d||J'> for J = J' = 1/2
    let m_j: DVector<f64> = DVector::from_iterator(g.len(), data.ground.basis().into_iter().map(|(_, mj)| mj));
    let elem: f64 = e.iter().zip(g.iter()).zip(m_j.iter()).map(|((a, b), m)| a * b * m).sum();
    (2.0 / 3f64.sqrt() * data.d1.reduced_dipole_cm * elem).abs()
}

/// `g/2pi` (MHz) for dipole `mu` (C m) and the cavity mode volume.
pub fn coupling_from_dipole(data: &AtomData, mu_cm: f64, cavity: &Cavity) -> Result<f64> {
    let pc = &data.constants;
    let lambda = data.d1.wavelength_m;
    let v = cavity.mode_volume(lambda)?;
    let omega = 2.0 * std::f64::consts::PI * pc.speed_of_light_m_per_s / lambda;
    let g = mu_cm * (omega / (2.0 * pc.epsilon0_f_per_m * pc.hbar_js * v)).sqrt();
    Ok(g / (2.0 * std::f64::consts::PI) / 1e6)
}

/// The qubit state `|1>`, ground `(2, 0)`.
pub fn cavity_ground_label() -> HyperfineLabel {
    HyperfineLabel::new(2.0, 0.0)
}

/// The excited state `|e>`, D1 `(F' = 1, 0)`.
pub fn cavity_excited_label() -> HyperfineLabel {
    HyperfineLabel::new(1.0, 0.0)
}

/// Single-atom coupling `g0/2pi` (MHz) on the `|1> <-> |e>` D1 line at field `b0`.
pub fn coupling_strength(data: &AtomData, b0: f64, cavity: &Cavity) -> Result<f64> {
    let mu = transition_dipole(data, cavity_ground_label(), cavity_excited_label(), b0)?;
    coupling_from_dipole(data, mu, cavity)
}

/// Eigenstates at each field (parallel over the grid).
pub fn energy_scan(c: &HyperfineLevelConstants, fields: &[f64]) -> Result<Vec<Vec<ZeemanEigenstate>>> {
    fields.par_iter().map(|&b| eigenstates(c, b)).collect()
}

/// CSV `B_gauss,E_<label>...` with one energy column per state.
pub fn write_energy_csv<W: Write>(fields: &[f64], scan: &[Vec<ZeemanEigenstate>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = scan.first() {
        let mut header = vec!["B_gauss".to_string()];
        header.extend(first.iter().map(|s| format!("E_{}", s.label)));
        w.write_record(&header)?;
    }
    for (b, states) in fields.iter().zip(scan) {
        let mut row = vec![b.to_string()];
        row.extend(states.iter().map(|s| s.energy.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(B, delta_f_hz)` for a step `db` at each field.
pub fn sensitivity_scan(c: &HyperfineLevelConstants, pair: &LevelPair, fields: &[f64], db: f64) -> Result<Vec<(f64, f64)>> {
    fields.par_iter().map(|&b| Ok((b, transition_sensitivity(c, pair, b, db)?))).collect()
}

/// CSV `B_gauss,delta_f_hz`.
pub fn write_sensitivity_csv<W: Write>(rows: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["B_gauss", "delta_f_hz"])?;
    for (b, df) in rows {
        w.write_record([b.to_string(), df.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
