//! Numerically stable binomial probability mass evaluation.
//!
//! All stopping rules in this crate reduce to comparisons against
//! `b(n, p, x) = C(n, x) p^x (1-p)^(n-x)`, evaluated for step counts up to
//! 10^7. A naive log-gamma difference loses ~8 digits there through
//! cancellation of O(n log n) terms, so the mass is evaluated in deviance
//! form (Stirling error plus binomial deviance), the same scheme used by
//! R's `dbinom`. Relative error of the log value stays below 1e-13 across
//! the supported range.

use crate::error::{Error, Result};

/// Parameters of a binomial point mass `b(n, p, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialParams {
    /// Number of trials.
    pub n: u64,
    /// Success probability in [0, 1].
    pub p: f64,
    /// Success count, `0 <= x <= n`.
    pub x: u64,
}

impl BinomialParams {
    pub fn new(n: u64, p: f64, x: u64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "success probability must lie in [0, 1], got {p}"
            )));
        }
        if x > n {
            return Err(Error::InvalidParameter(format!(
                "success count {x} exceeds trial count {n}"
            )));
        }
        Ok(Self { n, p, x })
    }
}

/// Natural log of the binomial point mass.
///
/// Exact `-inf` when the mass is zero (`p = 0, x > 0` or `p = 1, x < n`) and
/// exactly `0` when the mass is one (`n = 0`, or a degenerate `p` with the
/// matching count).
pub fn log_binom_pmf(params: &BinomialParams) -> f64 {
    ln_pmf_raw(params.n, params.p, params.x)
}

/// Binomial point mass `b(n, p, x)` in [0, 1].
pub fn binom_pmf(params: &BinomialParams) -> f64 {
    log_binom_pmf(params).exp()
}

/// Unvalidated core of [`log_binom_pmf`] for hot loops.
pub(crate) fn ln_pmf_raw(n: u64, p: f64, x: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && x <= n);
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    if x == 0 {
        return nf * (-p).ln_1p();
    }
    if x == n {
        return nf * p.ln();
    }
    let xf = x as f64;
    let nx = (n - x) as f64;
    let q = 1.0 - p;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nx) - bd0(xf, nf * p) - bd0(nx, nf * q);
    let lf = LN_2PI + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Exact factorials 0!..=15!, all representable in f64.
const FACT: [f64; 16] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
];

/// Error of Stirling's approximation,
/// `ln n! - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`, for integer `n >= 1`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15.0 {
        return FACT[n as usize].ln() - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Binomial deviance term `x ln(x / np) + np - x`, evaluated by series
/// when `x` is close to `np` to avoid cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1u32;
        loop {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
        }
    }
    x * (x / np).ln() + np - x
}
