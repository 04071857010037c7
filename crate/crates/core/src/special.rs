//! Digamma, log-gamma and a few helpers built on them.
//!
//! Both functions shift the argument upward with their recurrence until the
//! asymptotic (Stirling / Bernoulli) series converges to double precision,
//! which keeps them accurate over the full range the variational updates
//! touch (tiny Dirichlet masses up to counts in the millions).

use std::f64::consts::PI;

const SHIFT_THRESHOLD: f64 = 10.0;

// B_{2k} / (2k) for k = 1..7.
const DIGAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

// B_{2k} / (2k (2k - 1)) for k = 1..7.
const STIRLING_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
];

/// Digamma function ψ(x) = d/dx ln Γ(x) for x > 0.
///
/// Returns NaN for non-positive or NaN input.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut series = 0.0;
    let mut pow = inv2;
    for c in DIGAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    acc + z.ln() - 0.5 / z - series
}

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    // Product of the shifted factors x (x+1) ... stays far from overflow
    // because the loop runs at most ten times.
    let mut z = x;
    let mut prod = 1.0;
    while z < SHIFT_THRESHOLD {
        prod *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - prod.ln()
}

/// ln(x!) for a nonnegative integer count.
pub fn ln_factorial(x: u64) -> f64 {
    if x <= 20 {
        (2..=x).map(|t| (t as f64).ln()).sum()
    } else {
        ln_gamma(x as f64 + 1.0)
    }
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log of the multinomial coefficient (Σ n_h)! / Π n_h!.
pub fn ln_multinomial_coefficient(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    ln_factorial(total) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// Normalizes `logits` in place into probabilities with a max-shifted
/// exponentiation. Returns the log normalizer.
pub fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

/// x ln x with the 0 ln 0 = 0 convention.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}
