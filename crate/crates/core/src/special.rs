//! Log-gamma, digamma, trigamma and the Gaussian log-CDF.
//!
//! All functions are defined for positive real arguments only. Small
//! arguments are shifted upward with the recurrence relations and the
//! asymptotic (Stirling / Bernoulli) series is evaluated once the argument is
//! large enough that the truncated tail is below `1e-16`.

use libm::erfc;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const LN_GAMMA_SHIFT: f64 = 15.0;
const DIGAMMA_SHIFT: f64 = 10.0;

// B_{2k} / (2k (2k - 1)) for k = 1..7
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// Natural log of the gamma function, `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= LN_GAMMA_SHIFT {
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x);
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < LN_GAMMA_SHIFT {
        prod *= y;
        y += 1.0;
    }
    ln_gamma(y) - prod.ln()
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) - ln Γ(a + b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln Γ(x + 1/2) - ln Γ(x)` without the cancellation of the direct
/// difference at large `x`.
pub fn ln_gamma_half_ratio(x: f64) -> f64 {
    if x < LN_GAMMA_SHIFT {
        return ln_gamma(x + 0.5) - ln_gamma(x);
    }
    // Stirling at x + 1/2 minus Stirling at x, regrouped.
    x * (0.5 / x).ln_1p() - 0.5 + 0.5 * x.ln() + (stirling_tail(x + 0.5) - stirling_tail(x))
}

/// Digamma ψ(x) = d/dx ln Γ(x), `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut y = x;
    let mut shift = 0.0;
    while y < DIGAMMA_SHIFT {
        shift += 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    // B_{2k} / (2k) for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    y.ln() - 0.5 / y - series - shift
}

/// Trigamma ψ'(x), `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut y = x;
    let mut shift = 0.0;
    while y < DIGAMMA_SHIFT {
        shift += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // B_{2k} for k = 1..7
    let series = inv2
        * inv
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2
                                * (1.0 / 30.0
                                    - inv2
                                        * (5.0 / 66.0
                                            - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    inv + 0.5 * inv2 + series + shift
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)` for the standard normal CDF, accurate far into both tails.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 0.0 {
        return (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p();
    }
    if x > -30.0 {
        return (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln();
    }
    // Mills-ratio asymptotic series.
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=5 {
        term *= -((2 * k - 1) as f64) * inv2;
        series += term;
    }
    -0.5 * x * x - HALF_LN_2PI - (-x).ln() + series.ln()
}
