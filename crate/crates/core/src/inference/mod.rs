//! Covariance construction, chi-square machinery, and the test of equal
//! leading reinforcement means.

mod chi2;
mod covariance;
mod matrix;

use thiserror::Error;

use crate::estimators::EstimatorError;

pub use chi2::{chi_square_cdf, chi_square_quantile, chi_square_sf, regularized_gamma};
pub use covariance::{
    build_sigma, build_sigma_star_alt, build_sigma_star_null, pairwise_stat, Regime,
};
pub use matrix::{spd_inverse, Cholesky, SymMatrix, MAX_CONDITION, PIVOT_TOLERANCE};
pub use test::{
    arm_order, run_test, run_test_with, theta_statistic, TestOptions, TestResult, DEFAULT_MIN_DRAWS,
};

/// Arm indices in errors are zero-based; messages print one-based colors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("matrix rows are not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite (pivot {pivot} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("color {} has {draws} draws, {required} needed", arm + 1)]
    InsufficientDraws {
        arm: usize,
        draws: u64,
        required: u64,
    },
    #[error("invalid arm selection: {0}")]
    InvalidArms(String),
    #[error("mean draw count estimate {0} is not positive")]
    NonPositiveMu(f64),
    #[error("standardizing variance is zero")]
    ZeroVariance,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}
