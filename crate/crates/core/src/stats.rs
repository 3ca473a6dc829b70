//! Distribution helpers shared by the estimators and tests.

use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};
use statrs::function::erf::erfc;

/// Two-sided standard normal p-value of a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// p-value for `estimate / se`; a zero standard error gives 1 for an
/// estimate at rounding level (|estimate| <= 1e-12) and 0 otherwise.
pub fn z_test_p(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        normal_two_sided_p(estimate / se)
    } else if estimate.abs() <= 1e-12 {
        1.0
    } else {
        0.0
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

/// Critical value of a two-sided normal interval at confidence `level`.
pub fn critical_value(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

/// Relative slack used when comparing binomial probabilities for ties.
const BINOM_TIE_RTOL: f64 = 1e-7;

/// Exact two-sided binomial test of `k` successes in `n` trials: sum of the
/// probabilities of all outcomes no more likely than the observed one.
pub fn binomial_two_sided_p(k: u64, n: u64, q: f64) -> f64 {
    assert!(k <= n);
    if n == 0 {
        return 1.0;
    }
    let dist = Binomial::new(q, n).expect("valid binomial");
    let observed = dist.pmf(k);
    let bound = observed * (1.0 + BINOM_TIE_RTOL);
    let p: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&pi| pi <= bound).sum();
    p.min(1.0)
}
