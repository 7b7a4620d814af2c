//! Bounded-independence-plus-noise pseudorandom generators for read-once
//! branching programs in any variable order, with exact Fourier oracles and
//! an experiment harness.
//!
//! Bit 0 of every [`BitVector`] is variable `x₁`.

pub mod algebra;
pub mod dist;
pub mod error;
pub mod primitives;
pub mod robp;
pub mod fourier;
pub mod generator;
pub mod harness;

pub use algebra::{
    bitwise_and, character_eval, chi, field_multiply, frobenius_norm, xor_add, BitVector, DenseMatrix, FieldContext,
    FieldElement,
};
pub use dist::ExactDistribution;
pub use error::{Error, Result};
pub use primitives::{DistributionDescriptor, DistributionKind, EnumerationBudget};
pub use fourier::{FourierExpansion, MassBoundMode, MatrixFunction};
pub use generator::{GeneratorSpec, Variant};
pub use harness::{ExperimentConfig, FoolingError, Report, StepParams};
pub use robp::{BranchingProgram, ReadOnceFormula};
