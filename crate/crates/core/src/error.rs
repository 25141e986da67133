use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hilbert space dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("invalid excitation number m = {m} for {n_atoms} atoms")]
    InvalidExcitation { n_atoms: usize, m: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time {t} outside the pulse window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("integrator gave up at t = {time} us after {steps} attempted steps")]
    IntegratorFailure { time: f64, steps: usize },

    #[error("gradient sensing requires an even number of atoms, got {0}")]
    OddAtomCount(usize),

    #[error("adiabatic label tracking lost state (overlap {overlap:.3} at B = {field} G)")]
    LabelTracking { overlap: f64, field: f64 },

    #[error("level ({f}, {m_f}) not present in the manifold")]
    UnknownLevel { f: f64, m_f: f64 },

    #[error("no sign change of the differential slope in [{lo}, {hi}] G")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("unstable cavity geometry: length {length} m, mirror radius {radius} m")]
    UnstableCavity { length: f64, radius: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
