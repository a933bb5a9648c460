//! Finite-field arithmetic and exact linear algebra.
//!
//! Decodability of a random linear code is a rank question over the code's
//! field, so everything here is exact: no pivot tolerances.

mod field;
mod matrix;

pub use field::{Field, FieldElem, FieldSpec};
pub use matrix::{Echelon, FieldMatrix};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GaloisError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector length must be at least 1")]
    EmptyVector,
    #[error("value {value} is not an element of a field of order {order}")]
    OutOfRange { value: u32, order: u32 },
    #[error("invalid field: {0}")]
    InvalidField(String),
}
