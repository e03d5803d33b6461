//! Plug-in estimators of `N`, `Q`, `Z` and the reinforcement moments, all
//! read off an urn's running sums.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::urn::UrnState;

/// Joint draws of two colors needed before the product-form cross moment
/// is trusted.
pub const DEFAULT_MIN_JOINT: u64 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("no stages observed yet")]
    NoStages,
    #[error("color {0} has never been drawn")]
    NoDrawsForColor(usize),
    #[error("colors {0} and {1} have no joint or single observations")]
    NoJointObservations(usize, usize),
    #[error("variance estimate for color {k} is {value}, below zero beyond rounding")]
    NegativeVariance { k: usize, value: f64 },
}

/// Which estimator of `E[A_k A_s]` produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossForm {
    /// `sum A_k A_s X_k X_s / sum X_k X_s`
    Product,
    /// `sum A_k A_s X_k / N_{A_k}`
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossMoment {
    pub value: f64,
    pub form: CrossForm,
}

/// Snapshot of every estimator at stage `n`. Per-color quantities that are
/// undefined (the color was never drawn) are `None`, and serialize as
/// `null`; `notes` says why. Matrix diagonals are `None`: the diagonal of
/// `q_cross_hat` is `q_hat`, that of `c_hat` is `sigma2_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub n: u64,
    pub mu_hat: f64,
    #[serde(rename = "qN_hat")]
    pub q_n_hat: f64,
    pub nu_hat: Vec<f64>,
    pub m_hat: Vec<Option<f64>>,
    pub q_hat: Vec<Option<f64>>,
    pub q_cross_hat: Vec<Vec<Option<CrossMoment>>>,
    pub sigma2_hat: Vec<Option<f64>>,
    pub c_hat: Vec<Vec<Option<f64>>>,
    #[serde(rename = "N_A")]
    pub n_a: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MomentEstimates {
    pub fn dim(&self) -> usize {
        self.nu_hat.len()
    }

    pub fn mean(&self, k: usize) -> Result<f64, EstimatorError> {
        self.m_hat[k].ok_or(EstimatorError::NoDrawsForColor(k))
    }

    pub fn variance(&self, k: usize) -> Result<f64, EstimatorError> {
        self.sigma2_hat[k].ok_or(EstimatorError::NoDrawsForColor(k))
    }

    /// The estimates of arms `order[0], order[1], ...`, relabelled
    /// `0, 1, ...`. `order` may select a subset.
    pub fn reordered(&self, order: &[usize]) -> MomentEstimates {
        let pick = |v: &Vec<Option<f64>>| order.iter().map(|&k| v[k]).collect();
        MomentEstimates {
            n: self.n,
            mu_hat: self.mu_hat,
            q_n_hat: self.q_n_hat,
            nu_hat: order.iter().map(|&k| self.nu_hat[k]).collect(),
            m_hat: pick(&self.m_hat),
            q_hat: pick(&self.q_hat),
            q_cross_hat: order
                .iter()
                .map(|&k| order.iter().map(|&s| self.q_cross_hat[k][s]).collect())
                .collect(),
            sigma2_hat: pick(&self.sigma2_hat),
            c_hat: order
                .iter()
                .map(|&k| order.iter().map(|&s| self.c_hat[k][s]).collect())
                .collect(),
            n_a: order.iter().map(|&k| self.n_a[k]).collect(),
            notes: self.notes.clone(),
        }
    }

    /// `c_{ks}` for `k != s`, `sigma^2_k` on the diagonal.
    pub fn covariance(&self, k: usize, s: usize) -> Result<f64, EstimatorError> {
        if k == s {
            return self.variance(k);
        }
        self.c_hat[k][s].ok_or(EstimatorError::NoJointObservations(k, s))
    }
}

fn require_stages(state: &UrnState) -> Result<f64, EstimatorError> {
    if state.n == 0 {
        Err(EstimatorError::NoStages)
    } else {
        Ok(state.n as f64)
    }
}

/// `sum N_j / n`
pub fn estimate_mu(state: &UrnState) -> Result<f64, EstimatorError> {
    Ok(state.sums.sum_n as f64 / require_stages(state)?)
}

/// `sum N_j^2 / n`
pub fn estimate_qn(state: &UrnState) -> Result<f64, EstimatorError> {
    Ok(state.sums.sum_n2 as f64 / require_stages(state)?)
}

/// `(1/n) sum X_jk / N_j`
pub fn estimate_nu(state: &UrnState) -> Result<Vec<f64>, EstimatorError> {
    let n = require_stages(state)?;
    Ok((0..state.dim()).map(|k| state.sums.ratio(k) / n).collect())
}

fn draws_of(state: &UrnState, k: usize) -> Result<f64, EstimatorError> {
    match state.n_a[k] {
        0 => Err(EstimatorError::NoDrawsForColor(k)),
        c => Ok(c as f64),
    }
}

/// `sum A_jk X_jk / N_{A_k,n}`
pub fn estimate_mean_payoff(state: &UrnState, k: usize) -> Result<f64, EstimatorError> {
    Ok(state.sums.ax(k) / draws_of(state, k)?)
}

/// `sum A_jk^2 X_jk / N_{A_k,n}`
pub fn estimate_second_moment(state: &UrnState, k: usize) -> Result<f64, EstimatorError> {
    Ok(state.sums.a2x(k) / draws_of(state, k)?)
}

/// Estimate of `E[A_k A_s]`, `k != s`.
///
/// The product form needs both colors drawn in the same stage; once that
/// has happened `min_joint` times (counted as `sum X_k X_s`) it is used.
/// Otherwise the single-color form is used, taken from whichever of the two
/// colors has been drawn more (the lower index on ties) so the result is
/// symmetric in `(k, s)`.
pub fn estimate_cross_moment(
    state: &UrnState,
    k: usize,
    s: usize,
    min_joint: u64,
) -> Result<CrossMoment, EstimatorError> {
    assert_ne!(k, s, "cross moment needs two distinct colors");
    let joint = state.sums.xx(k, s);
    if joint >= min_joint.max(1) {
        return Ok(CrossMoment {
            value: state.sums.aaxx(k, s) / joint as f64,
            form: CrossForm::Product,
        });
    }
    let (a, b) = (k.min(s), k.max(s));
    let base = if state.n_a[b] > state.n_a[a] { b } else { a };
    let other = if base == a { b } else { a };
    match state.n_a[base] {
        0 => Err(EstimatorError::NoJointObservations(k, s)),
        c => Ok(CrossMoment {
            value: state.sums.aax(base, other) / c as f64,
            form: CrossForm::Fallback,
        }),
    }
}

/// All estimators, with `sigma2_hat` and `c_hat` filled in.
pub fn estimate_all(state: &UrnState) -> Result<MomentEstimates, EstimatorError> {
    estimate_all_with(state, DEFAULT_MIN_JOINT)
}

pub fn estimate_all_with(
    state: &UrnState,
    min_joint: u64,
) -> Result<MomentEstimates, EstimatorError> {
    let d = state.dim();
    let mut notes = Vec::new();
    let mut m_hat = vec![None; d];
    let mut q_hat = vec![None; d];
    for k in 0..d {
        match (
            estimate_mean_payoff(state, k),
            estimate_second_moment(state, k),
        ) {
            (Ok(m), Ok(q)) => {
                m_hat[k] = Some(m);
                q_hat[k] = Some(q);
            }
            (Err(e), _) | (_, Err(e)) => notes.push(format!("m_hat[{k}], q_hat[{k}]: {e}")),
        }
    }
    let mut q_cross_hat = vec![vec![None; d]; d];
    for k in 0..d {
        for s in (k + 1)..d {
            match estimate_cross_moment(state, k, s, min_joint) {
                Ok(c) => {
                    q_cross_hat[k][s] = Some(c);
                    q_cross_hat[s][k] = Some(c);
                }
                Err(e) => notes.push(format!("q_cross_hat[{k}][{s}]: {e}")),
            }
        }
    }
    let est = MomentEstimates {
        n: state.n,
        mu_hat: estimate_mu(state)?,
        q_n_hat: estimate_qn(state)?,
        nu_hat: estimate_nu(state)?,
        m_hat,
        q_hat,
        q_cross_hat,
        sigma2_hat: vec![None; d],
        c_hat: vec![vec![None; d]; d],
        n_a: state.n_a.clone(),
        notes,
    };
    derive_variances(est)
}

/// `sigma^2_k = q_k - m_k^2` (rounding below zero clipped) and
/// `c_{ks} = q_{ks} - m_k m_s`.
pub fn derive_variances(mut est: MomentEstimates) -> Result<MomentEstimates, EstimatorError> {
    let d = est.dim();
    for k in 0..d {
        est.sigma2_hat[k] = match (est.m_hat[k], est.q_hat[k]) {
            (Some(m), Some(q)) => Some(clip_variance(k, q, m)?),
            _ => None,
        };
    }
    for k in 0..d {
        for s in 0..d {
            est.c_hat[k][s] = match (k != s, est.q_cross_hat[k][s], est.m_hat[k], est.m_hat[s]) {
                (true, Some(c), Some(mk), Some(ms)) => Some(c.value - mk * ms),
                _ => None,
            };
        }
    }
    Ok(est)
}

fn clip_variance(k: usize, q: f64, m: f64) -> Result<f64, EstimatorError> {
    let v = q - m * m;
    // q >= m^2 holds exactly in real arithmetic, so anything below zero is
    // rounding of order a few ulps of q.
    let tol = 1e-9f64.max(1e-12 * q.abs());
    if v >= 0.0 {
        Ok(v)
    } else if v >= -tol {
        Ok(0.0)
    } else {
        Err(EstimatorError::NegativeVariance { k, value: v })
    }
}
