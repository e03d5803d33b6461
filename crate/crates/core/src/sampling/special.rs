//! Log-gamma and log-binomial helpers shared by the pmfs and the chi-square code.

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain: {x}");
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ln C(n, k)`; `-inf` when `k > n`.
///
/// Small `min(k, n-k)` goes through the product form, which avoids the
/// cancellation between large log-gamma values.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= 32 {
        let base = (n - k) as f64;
        (1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum()
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..=20u64 {
            fact *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            assert!(
                (got - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0),
                "n={n}"
            );
        }
    }

    #[test]
    fn gamma_half() {
        let want = std::f64::consts::PI.sqrt().ln();
        assert!((ln_gamma(0.5) - want).abs() < 1e-14);
        assert!((ln_gamma(1.5) - (0.5 * std::f64::consts::PI.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn gamma_agrees_with_statrs() {
        for &x in &[0.1, 0.7, 1.0, 2.5, 3.0, 7.25, 40.0, 123.456, 1.0e5] {
            let want = statrs::function::gamma::ln_gamma(x);
            assert!(
                (ln_gamma(x) - want).abs() <= 1e-12 * want.abs().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn choose_small_values() {
        assert!((ln_choose(4, 2) - 6f64.ln()).abs() < 1e-15);
        assert!((ln_choose(12, 6) - 924f64.ln()).abs() < 1e-13);
        assert_eq!(ln_choose(5, 0), 0.0);
        assert_eq!(ln_choose(5, 5), 0.0);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn choose_branches_agree() {
        // k = 33 goes through the log-gamma branch, k = 32 through the product.
        let a = ln_choose(200, 33);
        let b = ln_choose(200, 32) + (168f64 / 33.0).ln();
        assert!((a - b).abs() < 1e-11);
    }
}
