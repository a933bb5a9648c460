//! Closed-form decoding probabilities and expected-loss curves.
//!
//! The received-packet count by time `t` is Binomial(W, F(Ω·t)). Given `N`
//! packets, their windows follow a multinomial over Γ. Class `l` of a NOW
//! code decodes iff at least `k_l` packets came from window `l`; EW
//! decodability is evaluated by a generic-rank oracle over a large prime
//! field. Expected loss sums the energy of every class weighted by the
//! probability that it is still missing.

mod combinatorics;
mod loss;
mod probability;

pub use combinatorics::{multinomial_coefficient, multinomial_weight, multinomial_weight_exact, Compositions};
pub use loss::{
    class_decode_at, expected_loss, expected_loss_rxc, loss_bound_cxr, mds_loss, normalized_expected_loss,
    normalized_loss_bound_cxr, repetition_loss, ClassVariances, LossCurve,
};
pub use probability::{
    binomial_tail, now_decode_prob, now_decode_prob_enumerated, now_decode_prob_exact, DecodeProbTable,
    GenericRankOracle,
};

/// Largest received count for which compositions are enumerated.
pub const MAX_ENUMERATED: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("received count {0} exceeds the enumeration cap of {MAX_ENUMERATED}")]
    TooLarge(usize),
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("{what}: expected {expected} entries, got {found}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("MDS baseline needs at least as many workers ({workers}) as sub-products ({blocks})")]
    TooFewWorkers { blocks: usize, workers: usize },
    #[error("the generic-rank oracle supports NOW, EW and MDS windows only")]
    UnsupportedFamily,
    #[error("invalid class variances: {0}")]
    InvalidVariances(String),
    #[error(transparent)]
    Latency(#[from] crate::latency::LatencyError),
}
