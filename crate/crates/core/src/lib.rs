//! Unequal-error-protection (UEP) random linear coding for distributed
//! approximate matrix multiplication with stragglers.
//!
//! A parameter server splits `C = A·B` into sub-products, ranks them by
//! importance, and hands each worker one coded product built from a randomly
//! selected window of sub-products (non-overlapping windows, NOW, or
//! expanding windows, EW). Whatever arrives before the deadline is decoded;
//! everything else is left at zero. Besides the simulation pipeline the crate
//! carries closed-form decoding probabilities and expected-loss curves.
//!
//! Module map:
//!
//! - [`galois`]: GF(2^m) / GF(p) arithmetic and exact elimination
//! - [`tensor`]: dense real matrices and the two block partitions
//! - [`importance`]: norm-based importance levels and product classes
//! - [`coding`]: NOW / EW / MDS / repetition / uncoded encoders
//! - [`decoding`]: rank-oracle and numeric decoders, reconstruction
//! - [`latency`]: worker response times and the arrival-count law
//! - [`analytics`]: decoding probabilities, expected loss and bounds
//! - [`synth`]: Gaussian class matrices and gradient-like sparse matrices

// Validation uses `!(x >= 0)` so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod coding;
pub mod decoding;
pub mod galois;
pub mod importance;
pub mod latency;
pub mod scalar;
pub mod synth;
pub mod tensor;

pub use scalar::Real;

/// Double-precision matrix, the default payload type.
pub type Matrix = tensor::RealMatrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = tensor::RealMatrix<f32>;
/// Exact rational used for load scaling (`Ω = sub-products / workers`).
pub type Rational = num_rational::Ratio<u64>;
/// Arbitrary-precision rational for exact probability bookkeeping.
pub type ExactProb = num_rational::BigRational;

pub type LossCurve = analytics::LossCurve<f64>;
pub type LatencyModel = latency::LatencyModel<f64>;
pub type WindowDistribution = coding::WindowDistribution<f64>;
pub type ClassVariances = analytics::ClassVariances<f64>;
