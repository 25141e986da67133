//! Simulation and pulse optimisation for entangling N three-level atoms in a
//! lossy optical cavity, with Fisher-information metrology and Rb-87 Zeeman
//! structure.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod metrology;
pub mod operator;
pub mod optimizer;
pub mod pulse;
pub mod scalar;
pub mod sweep;
pub mod zeeman;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type DensityMatrixF64 = dynamics::DensityMatrix<f64>;
pub type DensityMatrixF32 = dynamics::DensityMatrix<f32>;
pub type OperatorF64 = operator::OperatorMatrix<f64>;
pub type OperatorF32 = operator::OperatorMatrix<f32>;
pub type PulseParamsF64 = pulse::PulseParams<f64>;
pub type PulseParamsF32 = pulse::PulseParams<f32>;
pub type DigitizedPulseF64 = pulse::DigitizedPulse<f64>;
pub type PhysicalParamsF64 = dynamics::PhysicalParams<f64>;
pub type PhysicalParamsF32 = dynamics::PhysicalParams<f32>;
pub type AtomicStateF64 = metrology::AtomicState<f64>;
pub type AtomicStateF32 = metrology::AtomicState<f32>;
pub type PropagatorF64<'b> = dynamics::Propagator<'b, f64>;
pub type PropagatorF32<'b> = dynamics::Propagator<'b, f32>;
