//! Facilitated symmetric exclusion and symmetric stack dynamics on rings.
//!
//! The crate covers configuration types and predicates ([`lattice`]), the
//! synchronous kernels ([`dynamics`]), substitution maps between the two
//! models ([`substitution`]), exact finite-ring and transfer-matrix analysis
//! ([`exact`], [`transfer`]), samplers for the stationary states
//! ([`gibbs`]) and the statistical tests built on them ([`stats`]).

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod gibbs;
pub mod lattice;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod substitution;
pub mod transfer;

pub use dynamics::{coupled_step, evolve, step_fssep, step_ssm, CoupledState};
pub use error::{Error, Result};
pub use lattice::{ExclusionConfig, ParitySequence, StackConfig};
pub use rng::RngContext;
pub use scalar::{Field, Rational, Real};
pub use substitution::SubstitutionRule;

/// Transfer operator in double precision.
pub type TransferSpecF64 = transfer::TransferSpec<f64>;
/// Transfer operator in single precision.
pub type TransferSpecF32 = transfer::TransferSpec<f32>;
/// Finite even-sector chain with floating-point probabilities.
pub type MarkovModelF64 = exact::FiniteMarkovModel<f64>;
/// Finite even-sector chain with exact rational probabilities.
pub type ExactMarkovModel = exact::FiniteMarkovModel<Rational>;
