//! Exact samplers and pmfs for the hypergeometric and multinomial families.
//!
//! Every sampler is an inversion of the exact pmf: one uniform per
//! univariate draw, cumulative probabilities built from pmf ratios. Small
//! draw counts start the walk at the lower end of the support with the
//! starting mass computed as a short product; larger ones start at the mode
//! with the starting mass taken from log-binomials and walk outwards.

use rand::Rng;

use super::special::{ln_choose, ln_factorial};
use super::{CountVector, SamplingError};

/// Draw counts up to this size use the product form for the starting mass.
const SMALL_DRAWS: u64 = 16;

const PROB_TOLERANCE: f64 = 1e-12;

/// Number of successes in `draws` draws without replacement from an urn of
/// `total` balls of which `successes` are successes.
pub fn sample_hypergeometric<R: Rng + ?Sized>(
    successes: u64,
    total: u64,
    draws: u64,
    rng: &mut R,
) -> Result<u64, SamplingError> {
    if successes > total || draws > total {
        return Err(SamplingError::HypergeometricRange {
            successes,
            total,
            draws,
        });
    }
    Ok(hypergeometric_unchecked(successes, total, draws, rng))
}

pub(crate) fn hypergeometric_unchecked<R: Rng + ?Sized>(
    successes: u64,
    total: u64,
    draws: u64,
    rng: &mut R,
) -> u64 {
    let failures = total - successes;
    let lo = draws.saturating_sub(failures);
    let hi = draws.min(successes);
    if lo == hi {
        return lo;
    }
    // Reduce to a lower bound of zero: swap successes and failures, or
    // count the balls left behind instead of the ones drawn.
    if lo == 0 {
        hyper_from_zero(successes, total, draws, rng)
    } else if draws <= successes {
        draws - hyper_from_zero(failures, total, draws, rng)
    } else {
        successes - hyper_from_zero(successes, total, total - draws, rng)
    }
}

/// Requires `draws <= total - successes` so the support starts at zero.
fn hyper_from_zero<R: Rng + ?Sized>(successes: u64, total: u64, draws: u64, rng: &mut R) -> u64 {
    let failures = total - successes;
    debug_assert!(draws <= failures);
    let hi = draws.min(successes);
    if hi == 0 {
        return 0;
    }
    let k = successes as f64;
    let nf = failures as f64;
    let nd = draws as f64;
    let up = |x: u64| {
        let x = x as f64;
        (k - x) * (nd - x) / ((x + 1.0) * (nf - nd + x + 1.0))
    };
    let u: f64 = rng.random();
    if draws <= SMALL_DRAWS {
        let total = total as f64;
        let (mut num, mut den) = (1.0, 1.0);
        for i in 0..draws {
            let i = i as f64;
            num *= nf - i;
            den *= total - i;
        }
        walk_up(u, 0, hi, num / den, up)
    } else {
        let down = |x: u64| {
            let x = x as f64;
            x * (nf - nd + x) / ((k - x + 1.0) * (nd - x + 1.0))
        };
        let mode = (((draws + 1) as f64 * (successes + 1) as f64) / (total + 2) as f64) as u64;
        let mode = mode.min(hi);
        let ln_p = ln_choose(successes, mode) + ln_choose(failures, draws - mode)
            - ln_choose(total, draws);
        walk_from_mode(u, 0, hi, mode, ln_p.exp(), up, down)
    }
}

/// Binomial(trials, p) by inversion.
pub(crate) fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    if p > 0.5 {
        return trials - binomial(trials, 1.0 - p, rng);
    }
    let q = 1.0 - p;
    let odds = p / q;
    let nt = trials as f64;
    let up = |x: u64| {
        let x = x as f64;
        (nt - x) / (x + 1.0) * odds
    };
    let u: f64 = rng.random();
    let ln_p0 = nt * (-p).ln_1p();
    if trials <= 64 && ln_p0 > -600.0 {
        walk_up(u, 0, trials, ln_p0.exp(), up)
    } else {
        let down = |x: u64| {
            let x = x as f64;
            x / (nt - x + 1.0) / odds
        };
        let mode = (((trials + 1) as f64) * p) as u64;
        let mode = mode.min(trials);
        let ln_p =
            ln_choose(trials, mode) + mode as f64 * p.ln() + (nt - mode as f64) * (-p).ln_1p();
        walk_from_mode(u, 0, trials, mode, ln_p.exp(), up, down)
    }
}

/// Inversion walking upwards from `lo`, whose mass is `p_lo`.
#[inline]
fn walk_up(u: f64, lo: u64, hi: u64, p_lo: f64, up: impl Fn(u64) -> f64) -> u64 {
    let mut x = lo;
    let mut p = p_lo;
    let mut cum = p;
    while u >= cum && x < hi {
        p *= up(x);
        x += 1;
        cum += p;
    }
    x
}

/// Inversion over the support visited in order of decreasing mass, starting
/// at the mode. Any fixed visiting order is an exact inversion; this one
/// needs the fewest steps for a unimodal pmf.
fn walk_from_mode(
    u: f64,
    lo: u64,
    hi: u64,
    mode: u64,
    p_mode: f64,
    up: impl Fn(u64) -> f64,
    down: impl Fn(u64) -> f64,
) -> u64 {
    let mut cum = p_mode;
    if u < cum {
        return mode;
    }
    let (mut left, mut right) = (mode, mode);
    let mut next_left = if left > lo { p_mode * down(left) } else { -1.0 };
    let mut next_right = if right < hi { p_mode * up(right) } else { -1.0 };
    let mut last = mode;
    loop {
        if next_left <= 0.0 && next_right <= 0.0 {
            // Remaining mass is below double precision.
            return last;
        }
        if next_right >= next_left {
            right += 1;
            cum += next_right;
            last = right;
            if u < cum {
                return right;
            }
            next_right = if right < hi {
                next_right * up(right)
            } else {
                -1.0
            };
        } else {
            left -= 1;
            cum += next_left;
            last = left;
            if u < cum {
                return left;
            }
            next_left = if left > lo {
                next_left * down(left)
            } else {
                -1.0
            };
        }
    }
}

/// Multi-Hyper draw: `draws` balls without replacement from composition `h`.
///
/// Colors are conditioned sequentially: `x_1 ~ Hyp(h_1, S, draws)`, then the
/// remaining draws are spread over the remaining colors.
pub fn sample_multivariate_hypergeometric<R: Rng + ?Sized>(
    h: &[u64],
    draws: u64,
    rng: &mut R,
) -> Result<CountVector, SamplingError> {
    let mut out = vec![0; h.len()];
    multivariate_hypergeometric_into(h, draws, rng, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`sample_multivariate_hypergeometric`]; `out`
/// must have the same length as `h`.
pub fn multivariate_hypergeometric_into<R: Rng + ?Sized>(
    h: &[u64],
    draws: u64,
    rng: &mut R,
    out: &mut [u64],
) -> Result<(), SamplingError> {
    let total: u64 = h.iter().sum();
    if draws > total {
        return Err(SamplingError::DrawsExceedTotal { draws, total });
    }
    debug_assert_eq!(out.len(), h.len());
    let mut rest_total = total;
    let mut rest_draws = draws;
    let last = h.len().saturating_sub(1);
    for (k, (&hk, xk)) in h.iter().zip(out.iter_mut()).enumerate() {
        if k == last {
            *xk = rest_draws;
            break;
        }
        let x = if rest_draws == 0 {
            0
        } else {
            hypergeometric_unchecked(hk, rest_total, rest_draws, rng)
        };
        *xk = x;
        rest_total -= hk;
        rest_draws -= x;
    }
    Ok(())
}

pub fn pmf_multivariate_hypergeometric(h: &[u64], draws: u64, x: &[u64]) -> f64 {
    if h.len() != x.len() {
        return 0.0;
    }
    let total: u64 = h.iter().sum();
    if draws > total || x.iter().sum::<u64>() != draws || x.iter().zip(h).any(|(xk, hk)| xk > hk) {
        return 0.0;
    }
    let ln_num: f64 = h.iter().zip(x).map(|(&hk, &xk)| ln_choose(hk, xk)).sum();
    (ln_num - ln_choose(total, draws)).exp().min(1.0)
}

pub(crate) fn check_probabilities(p: &[f64]) -> Result<(), SamplingError> {
    if p.is_empty() {
        return Err(SamplingError::InvalidProbabilities(
            "empty probability vector".into(),
        ));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(SamplingError::InvalidProbabilities(format!(
            "entry {bad} is negative or not finite"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(SamplingError::InvalidProbabilities(format!(
            "entries sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Multinomial(draws, p) by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(
    p: &[f64],
    draws: u64,
    rng: &mut R,
) -> Result<CountVector, SamplingError> {
    check_probabilities(p)?;
    let mut out = vec![0; p.len()];
    multinomial_into(p, draws, rng, &mut out);
    Ok(out)
}

/// Allocation-free multinomial draw. `p` must already be a probability
/// vector (up to rounding); it is not re-validated.
pub fn multinomial_into<R: Rng + ?Sized>(p: &[f64], draws: u64, rng: &mut R, out: &mut [u64]) {
    debug_assert_eq!(out.len(), p.len());
    out.iter_mut().for_each(|x| *x = 0);
    let mut rest = draws;
    let last = p.len() - 1;
    for k in 0..last {
        if rest == 0 {
            return;
        }
        let tail: f64 = p[k..].iter().sum();
        let cond = if tail > 0.0 {
            (p[k] / tail).min(1.0)
        } else {
            0.0
        };
        let x = binomial(rest, cond, rng);
        out[k] = x;
        rest -= x;
    }
    out[last] = rest;
}

pub fn pmf_multinomial(p: &[f64], draws: u64, x: &[u64]) -> Result<f64, SamplingError> {
    check_probabilities(p)?;
    if p.len() != x.len() || x.iter().sum::<u64>() != draws {
        return Ok(0.0);
    }
    let mut ln = ln_factorial(draws);
    for (&pk, &xk) in p.iter().zip(x) {
        if xk == 0 {
            continue;
        }
        if pk == 0.0 {
            return Ok(0.0);
        }
        ln += xk as f64 * pk.ln() - ln_factorial(xk);
    }
    Ok(ln.exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SimRng;

    fn freq<F: FnMut(&mut SimRng) -> u64>(reps: usize, mut f: F) -> Vec<f64> {
        let mut rng = SimRng::new(11, 0);
        let mut counts = vec![0usize; 64];
        for _ in 0..reps {
            counts[f(&mut rng) as usize] += 1;
        }
        counts.iter().map(|&c| c as f64 / reps as f64).collect()
    }

    #[test]
    fn hypergeometric_forced_cases() {
        let mut rng = SimRng::new(1, 0);
        assert_eq!(sample_hypergeometric(5, 5, 3, &mut rng).unwrap(), 3);
        assert_eq!(sample_hypergeometric(0, 7, 4, &mut rng).unwrap(), 0);
        assert_eq!(sample_hypergeometric(3, 9, 0, &mut rng).unwrap(), 0);
        assert_eq!(sample_hypergeometric(3, 9, 9, &mut rng).unwrap(), 3);
    }

    #[test]
    fn hypergeometric_rejects_bad_ranges() {
        let mut rng = SimRng::new(1, 0);
        assert!(matches!(
            sample_hypergeometric(6, 5, 1, &mut rng),
            Err(SamplingError::HypergeometricRange { .. })
        ));
        assert!(sample_hypergeometric(2, 5, 6, &mut rng).is_err());
    }

    #[test]
    fn hypergeometric_two_of_four() {
        // P(x=1) = C(2,1)C(2,1)/C(4,2) = 4/6
        let reps = 1_000_000;
        let f = freq(reps, |r| sample_hypergeometric(2, 4, 2, r).unwrap());
        let p = 2.0 / 3.0;
        let sd = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((f[1] - p).abs() < 3.0 * sd, "{}", f[1]);
    }

    #[test]
    fn hypergeometric_reduction_branches() {
        // lo > 0 reached via both the success/failure swap and the complement.
        let reps = 200_000;
        for &(k, total, draws) in &[(7u64, 10u64, 5u64), (3, 10, 9), (8, 10, 9)] {
            let f = freq(reps, |r| sample_hypergeometric(k, total, draws, r).unwrap());
            for x in 0..=draws.min(k) {
                let want = (ln_choose(k, x) + ln_choose(total - k, draws - x)
                    - ln_choose(total, draws))
                .exp();
                let sd = (want * (1.0 - want) / reps as f64).sqrt().max(1e-9);
                assert!(
                    (f[x as usize] - want).abs() < 4.0 * sd,
                    "k={k} x={x} {} vs {want}",
                    f[x as usize]
                );
            }
        }
    }

    #[test]
    fn hypergeometric_large_draws_use_mode_walk() {
        let reps = 200_000;
        let (k, total, draws) = (400u64, 1000u64, 50u64);
        let mut rng = SimRng::new(5, 0);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..reps {
            let x = sample_hypergeometric(k, total, draws, &mut rng).unwrap() as f64;
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / reps as f64;
        let var = sum2 / reps as f64 - mean * mean;
        let p = k as f64 / total as f64;
        let want_var = draws as f64 * p * (1.0 - p) * (total - draws) as f64 / (total - 1) as f64;
        assert!((mean - 20.0).abs() < 4.0 * (want_var / reps as f64).sqrt());
        assert!((var / want_var - 1.0).abs() < 0.02);
    }

    #[test]
    fn binomial_mean_and_variance() {
        let mut rng = SimRng::new(9, 3);
        for &(n, p) in &[(5u64, 0.3), (40, 0.8), (1000, 0.01), (5000, 0.4)] {
            let reps = 100_000;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..reps {
                let x = binomial(n, p, &mut rng) as f64;
                s += x;
                s2 += x * x;
            }
            let mean = s / reps as f64;
            let var = s2 / reps as f64 - mean * mean;
            let want = n as f64 * p * (1.0 - p);
            assert!(
                (mean - n as f64 * p).abs() < 5.0 * (want / reps as f64).sqrt(),
                "n={n} p={p}"
            );
            assert!((var / want - 1.0).abs() < 0.03, "n={n} p={p} var={var}");
        }
    }

    #[test]
    fn multivariate_forced() {
        let mut rng = SimRng::new(2, 0);
        assert_eq!(
            sample_multivariate_hypergeometric(&[1, 1, 1], 3, &mut rng).unwrap(),
            vec![1, 1, 1]
        );
        assert_eq!(
            sample_multivariate_hypergeometric(&[4, 0, 2], 6, &mut rng).unwrap(),
            vec![4, 0, 2]
        );
        assert!(matches!(
            sample_multivariate_hypergeometric(&[1, 1], 3, &mut rng),
            Err(SamplingError::DrawsExceedTotal { draws: 3, total: 2 })
        ));
    }

    #[test]
    fn multivariate_symmetric_pairs() {
        let reps = 1_000_000;
        let mut rng = SimRng::new(3, 0);
        let mut counts = [0usize; 3];
        for _ in 0..reps {
            let x = sample_multivariate_hypergeometric(&[1, 1, 1], 2, &mut rng).unwrap();
            let idx = match x.as_slice() {
                [1, 1, 0] => 0,
                [1, 0, 1] => 1,
                [0, 1, 1] => 2,
                other => panic!("impossible outcome {other:?}"),
            };
            counts[idx] += 1;
        }
        let p = 1.0 / 3.0;
        let sd = (p * (1.0 - p) / reps as f64).sqrt();
        for c in counts {
            assert!((c as f64 / reps as f64 - p).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn hypergeometric_pmf_values() {
        assert!(
            (pmf_multivariate_hypergeometric(&[1, 1, 1], 2, &[1, 1, 0]) - 1.0 / 3.0).abs() < 1e-15
        );
        assert!((pmf_multivariate_hypergeometric(&[2, 1], 2, &[2, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pmf_multivariate_hypergeometric(&[2, 1], 2, &[0, 2]), 0.0);
        assert_eq!(pmf_multivariate_hypergeometric(&[2, 1], 2, &[1, 0]), 0.0);
        assert_eq!(pmf_multivariate_hypergeometric(&[2, 1], 4, &[2, 2]), 0.0);
    }

    #[test]
    fn multinomial_values() {
        let mut rng = SimRng::new(4, 0);
        assert_eq!(
            sample_multinomial(&[1.0, 0.0, 0.0], 5, &mut rng).unwrap(),
            vec![5, 0, 0]
        );
        assert!(sample_multinomial(&[0.5, 0.6], 5, &mut rng).is_err());
        assert!(sample_multinomial(&[-0.5, 1.5], 5, &mut rng).is_err());

        let reps = 1_000_000;
        let heads = (0..reps)
            .filter(|_| sample_multinomial(&[0.5, 0.5], 1, &mut rng).unwrap() == vec![1, 0])
            .count();
        let sd = (0.25 / reps as f64).sqrt();
        assert!((heads as f64 / reps as f64 - 0.5).abs() < 3.0 * sd);
    }

    #[test]
    fn multinomial_pmf_values() {
        assert!((pmf_multinomial(&[0.5, 0.5], 2, &[1, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((pmf_multinomial(&[1.0, 0.0], 3, &[3, 0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pmf_multinomial(&[0.4, 0.4, 0.2], 2, &[1, 1, 0]).unwrap() - 0.32).abs() < 1e-15);
        assert_eq!(pmf_multinomial(&[1.0, 0.0], 3, &[2, 1]).unwrap(), 0.0);
        assert_eq!(pmf_multinomial(&[0.5, 0.5], 3, &[1, 1]).unwrap(), 0.0);
    }
}
