//! Random streams, exact discrete samplers, and the laws the urn draws from.

mod discrete;
mod laws;
mod rng;
pub mod special;

use thiserror::Error;

pub use discrete::{
    multinomial_into, multivariate_hypergeometric_into, pmf_multinomial,
    pmf_multivariate_hypergeometric, sample_hypergeometric, sample_multinomial,
    sample_multivariate_hypergeometric,
};
pub use laws::{
    law_moments, sample_draw_count, sample_replacement, DiscreteLaw, DrawCountLaw, LawMoments,
    ReplacementLaw, ReplacementVariant,
};
pub use rng::SimRng;

/// Per-color ball counts.
pub type CountVector = Vec<u64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("hypergeometric arguments out of range: successes={successes}, total={total}, draws={draws}")]
    HypergeometricRange {
        successes: u64,
        total: u64,
        draws: u64,
    },
    #[error("cannot draw {draws} balls from {total}")]
    DrawsExceedTotal { draws: u64, total: u64 },
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("no admissible draw count: the urn is empty")]
    EmptySupport,
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("A must be >= 1: component {component} can take the value {value}")]
    SupportBelowOne { component: usize, value: f64 },
}
