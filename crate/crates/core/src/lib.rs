//! Simulation and inference for the multicolored, multiple-drawing randomly
//! reinforced urn.
//!
//! At each stage a random number of balls is drawn (with or without
//! replacement), and every drawn ball of color `k` is reinforced by a random
//! amount `A_k >= 1`. The crate simulates the process, estimates the
//! reinforcement means and their asymptotic covariance, tests equality of
//! the leading means (the bandit question "are the best arms tied?"), and
//! runs the Monte Carlo experiments that check all of this.

pub mod cli;
pub mod estimators;
pub mod format;
pub mod harness;
pub mod inference;
pub mod sampling;
pub mod urn;
