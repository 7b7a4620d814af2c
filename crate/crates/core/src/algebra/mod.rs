//! Bit vectors over F₂ⁿ, Fourier characters, dense real matrices and GF(2^m).

pub mod bitvec;
pub mod field;
pub mod matrix;

pub use bitvec::{bitwise_and, character_eval, chi, xor_add, BitVector};
pub use field::{ceil_log2, field_multiply, FieldContext, FieldElement, LOW_WEIGHT_MODULI, MAX_FIELD_DEGREE};
pub use matrix::{frobenius_norm, DenseMatrix};
