//! Chi-square distribution through the regularized incomplete gamma
//! function: power series below `x = a + 1`, Lentz continued fraction above.

use super::InferenceError;
use crate::sampling::special::ln_gamma;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Regularized lower and upper incomplete gamma, `(P(a, x), Q(a, x))`.
/// Each is computed directly in its accurate regime, so small upper tails
/// keep their relative precision.
pub fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let p = (log_prefix.exp() * gamma_series(a, x)).min(1.0);
        (p, 1.0 - p)
    } else {
        let q = (log_prefix.exp() * gamma_continued_fraction(a, x)).min(1.0);
        (1.0 - q, q)
    }
}

/// `sum_k x^k / (a (a+1) ... (a+k))`
fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for `Gamma(a, x) e^x x^{-a}`, modified Lentz.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn check_df(df: u32) -> Result<f64, InferenceError> {
    if df == 0 {
        Err(InferenceError::Domain(
            "degrees of freedom must be at least 1".into(),
        ))
    } else {
        Ok(df as f64)
    }
}

/// `P(X <= x)` for `X ~ chi^2(df)`.
pub fn chi_square_cdf(x: f64, df: u32) -> Result<f64, InferenceError> {
    let k = check_df(df)?;
    if !(x >= 0.0) {
        return Err(InferenceError::Domain(format!(
            "chi-square argument {x} is negative"
        )));
    }
    Ok(regularized_gamma(k / 2.0, x / 2.0).0)
}

/// `P(X > x)`, accurate in the far tail.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64, InferenceError> {
    let k = check_df(df)?;
    if !(x >= 0.0) {
        return Err(InferenceError::Domain(format!(
            "chi-square argument {x} is negative"
        )));
    }
    Ok(regularized_gamma(k / 2.0, x / 2.0).1)
}

fn chi_square_pdf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return if k < 2.0 {
            f64::INFINITY
        } else if k == 2.0 {
            0.5
        } else {
            0.0
        };
    }
    let h = k / 2.0;
    ((h - 1.0) * x.ln() - x / 2.0 - h * std::f64::consts::LN_2 - ln_gamma(h)).exp()
}

/// `x` with `P(X <= x) = p`: Newton steps kept inside a bisection bracket.
pub fn chi_square_quantile(p: f64, df: u32) -> Result<f64, InferenceError> {
    let k = check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(InferenceError::Domain(format!(
            "quantile level {p} outside (0, 1)"
        )));
    }
    let cdf = |x: f64| regularized_gamma(k / 2.0, x / 2.0).0;
    let (mut lo, mut hi) = (0.0f64, k.max(1.0));
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    // Wilson-Hilferty start, clamped into the bracket.
    let z = normal_quantile_guess(p);
    let c = 2.0 / (9.0 * k);
    let mut x = (k * (1.0 - c + z * c.sqrt()).powi(3)).clamp(lo, hi);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = chi_square_pdf(x, k);
        let newton = x - f / pdf;
        let next = if pdf.is_finite() && pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE)
            || hi - lo <= f64::EPSILON * hi
        {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Rough standard-normal quantile, only a starting point for Newton.
fn normal_quantile_guess(p: f64) -> f64 {
    // Tukey's lambda approximation.
    4.91 * (p.powf(0.14) - (1.0 - p).powf(0.14))
}
