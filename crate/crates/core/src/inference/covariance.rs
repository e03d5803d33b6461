//! Limiting covariance `Sigma` of `sqrt(N_{A_k}) (m_hat_k - m_k)` and the
//! covariances `Sigma*` of consecutive standardized differences.
//!
//! Everything here indexes arms in the order of the estimates passed in;
//! the caller arranges them by decreasing mean first.

use super::{InferenceError, SymMatrix};
use crate::estimators::MomentEstimates;

fn dispersion(est: &MomentEstimates) -> Result<f64, InferenceError> {
    if !(est.mu_hat > 0.0) {
        return Err(InferenceError::NonPositiveMu(est.mu_hat));
    }
    Ok(est.q_n_hat / est.mu_hat - 1.0)
}

/// `Sigma` restricted to the first `size` arms, `t` of which are tied for
/// the largest mean.
fn sigma_top(est: &MomentEstimates, t: usize, size: usize) -> Result<SymMatrix, InferenceError> {
    if t == 0 || t > est.dim() || size > est.dim() {
        return Err(InferenceError::InvalidArms(format!(
            "t = {t} and size {size} must lie in 1..={}",
            est.dim()
        )));
    }
    let g = dispersion(est)?;
    let mut m = SymMatrix::zeros(size);
    for i in 0..size {
        let s2 = est.variance(i)?;
        m.set(
            i,
            i,
            if i < t {
                s2 * (est.nu_hat[i] * g + 1.0)
            } else {
                s2
            },
        );
        for j in (i + 1)..size.min(t) {
            let v = if g == 0.0 {
                0.0
            } else {
                est.covariance(i, j)? * (est.nu_hat[i] * est.nu_hat[j]).sqrt() * g
            };
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// `d x d` limiting covariance with the first `t` arms maximal: the leading
/// block couples them through `Q/N - 1`, the rest is diagonal.
pub fn build_sigma(est: &MomentEstimates, t: usize) -> Result<SymMatrix, InferenceError> {
    sigma_top(est, t, est.dim())
}

fn check_k0(est: &MomentEstimates, k0: usize) -> Result<(), InferenceError> {
    if k0 < 2 || k0 > est.dim() {
        return Err(InferenceError::InvalidArms(format!(
            "k0 = {k0} must lie in 2..={}",
            est.dim()
        )));
    }
    for q in 0..k0 {
        if est.n_a[q] == 0 {
            return Err(InferenceError::InsufficientDraws {
                arm: q,
                draws: 0,
                required: 1,
            });
        }
    }
    Ok(())
}

/// `sqrt(N_{A_{q+1}} / N_{A_q})` for `q = 0..k0-1`.
fn ratios(est: &MomentEstimates, k0: usize) -> Vec<f64> {
    (0..k0 - 1)
        .map(|q| (est.n_a[q + 1] as f64 / est.n_a[q] as f64).sqrt())
        .collect()
}

/// The general entry
/// `r_p r_q S_pq - r_q S_{p+1,q} - r_p S_{p,q+1} + S_{p+1,q+1}`,
/// which on the diagonal is `r_q^2 S_qq - 2 r_q S_{q,q+1} + S_{q+1,q+1}`.
fn full_entry(sigma: &SymMatrix, r: &[f64], p: usize, q: usize) -> f64 {
    r[p] * r[q] * sigma.get(p, q) - r[q] * sigma.get(p + 1, q) - r[p] * sigma.get(p, q + 1)
        + sigma.get(p + 1, q + 1)
}

/// `(k0-1) x (k0-1)` covariance of `V_q = sqrt(N_{A_{q+1}}) (m_hat_q -
/// m_hat_{q+1})` when the first `k0` means are equal (`t = k0`).
pub fn build_sigma_star_null(
    est: &MomentEstimates,
    k0: usize,
) -> Result<SymMatrix, InferenceError> {
    check_k0(est, k0)?;
    let sigma = sigma_top(est, k0, k0)?;
    let r = ratios(est, k0);
    Ok(SymMatrix::from_fn(k0 - 1, |p, q| {
        full_entry(&sigma, &r, p, q)
    }))
}

/// The same covariance when only the first `k < k0` means are maximal
/// (`t = k`). Off the diagonal, columns `q >= t` (one-based) use
/// `-r_q Sigma_{p+1,q}` for `p < q`, mirrored below the diagonal.
pub fn build_sigma_star_alt(
    est: &MomentEstimates,
    k0: usize,
    k: usize,
) -> Result<SymMatrix, InferenceError> {
    check_k0(est, k0)?;
    if k == 0 || k >= k0 {
        return Err(InferenceError::InvalidArms(format!(
            "k = {k} must lie in 1..{k0}"
        )));
    }
    let sigma = sigma_top(est, k, k0)?;
    let r = ratios(est, k0);
    // Zero-based: one-based q = t is zero-based q = t - 1.
    let t = k - 1;
    Ok(SymMatrix::from_fn(k0 - 1, |p, q| {
        if p == q {
            if q < t {
                full_entry(&sigma, &r, q, q)
            } else if q == t {
                sigma.get(q + 1, q + 1)
            } else {
                r[q] * r[q] * sigma.get(q, q) + sigma.get(q + 1, q + 1)
            }
        } else if q >= t {
            -r[q] * sigma.get(p + 1, q)
        } else {
            full_entry(&sigma, &r, p, q)
        }
    }))
}

/// Which asymptotic arrangement the pairwise statistic is standardized for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Arms `k` and `k+1` are both maximal and their means are equal.
    Null,
    /// Arm `k` is at or past the last maximal arm; `gap` is the true
    /// `m_k - m_{k+1}`.
    Alt { gap: f64 },
}

/// `(m_hat_k - m_hat_{k+1} - gap) / sqrt(T (s_k^2/N_k + s_{k+1}^2/N_{k+1}))`,
/// asymptotically standard normal in its regime. `T` corrects for the
/// coupling of two maximal arms and is 1 otherwise.
pub fn pairwise_stat(
    est: &MomentEstimates,
    k: usize,
    regime: Regime,
) -> Result<f64, InferenceError> {
    if k + 1 >= est.dim() {
        return Err(InferenceError::InvalidArms(format!("no arm after {k}")));
    }
    for a in [k, k + 1] {
        if est.n_a[a] == 0 {
            return Err(InferenceError::InsufficientDraws {
                arm: a,
                draws: 0,
                required: 1,
            });
        }
    }
    let (nk, nk1) = (est.n_a[k] as f64, est.n_a[k + 1] as f64);
    let (s2k, s2k1) = (est.variance(k)?, est.variance(k + 1)?);
    let base = s2k / nk + s2k1 / nk1;
    let (gap, t) = match regime {
        Regime::Null => (0.0, pairwise_t0(est, k)?),
        Regime::Alt { gap } => (gap, 1.0),
    };
    let scale = base * t;
    if !(scale > 0.0) {
        return Err(InferenceError::ZeroVariance);
    }
    Ok((est.mean(k)? - est.mean(k + 1)? - gap) / scale.sqrt())
}

/// `T^{k,k+1}_{n,0}`.
fn pairwise_t0(est: &MomentEstimates, k: usize) -> Result<f64, InferenceError> {
    let g = dispersion(est)?;
    let (nk, nk1) = (est.n_a[k] as f64, est.n_a[k + 1] as f64);
    let (s2k, s2k1) = (est.variance(k)?, est.variance(k + 1)?);
    let (zk, zk1) = (est.nu_hat[k], est.nu_hat[k + 1]);
    let cross = if g == 0.0 {
        0.0
    } else {
        2.0 * est.covariance(k, k + 1)? * (zk * zk1).sqrt() * g * (nk * nk1).sqrt()
    };
    let num = s2k * (zk * g + 1.0) * nk1 - cross + s2k1 * (zk1 * g + 1.0) * nk;
    let den = s2k * nk1 + s2k1 * nk;
    if !(den > 0.0) {
        return Err(InferenceError::ZeroVariance);
    }
    Ok(num / den)
}
