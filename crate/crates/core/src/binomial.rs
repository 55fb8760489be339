//! Exact binomial probabilities and the fixed-size exact test.
//!
//! Point probabilities use Loader's saddle-point form (Stirling remainders
//! plus the deviance term `bd0`), which stays accurate to a few ulps where a
//! plain difference of log-gamma values would lose about `log10(n)` digits.
//! Tails are summed term by term starting from the end that does not contain
//! the mode, so every summand is smaller than the previous one and the loop
//! can stop once a term no longer moves the running sum.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;
const LN_2PI: f64 = 1.837_877_066_409_345_483_560_659_472_811;

/// Summation stops once a term falls below this fraction of the running sum.
const TAIL_TERM_CUTOFF: f64 = 1e-18;

/// Both tails of `Binomial(n, p)` at a single count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbabilities {
    /// `P(X >= k)`.
    pub right_tail: f64,
    /// `P(X <= k)`.
    pub left_tail: f64,
    pub n: u64,
    pub k: u64,
}

/// Outcome of one exact test of `H: p = kappa` against either side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDecision {
    /// Too few failures for `p >= kappa`: conclude `p < kappa`.
    RejectUpper,
    /// Too many failures for `p <= kappa`: conclude `p > kappa`.
    RejectLower,
    NoRejection,
}

fn check_args(k: u64, n: u64, p: f64) -> Result<(), DomainError> {
    if k > n {
        return Err(DomainError::CountExceedsSize { k, n });
    }
    DomainError::check_probability("p", p)
}

/// `ln(n!)` by direct summation, used only for small arguments.
fn ln_factorial_small(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Remainder of Stirling's approximation: `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15.0 {
        return ln_factorial_small(n as u64) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated by series near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// Unchecked log pmf; callers guarantee `k <= n` and `p` in `[0, 1]`.
fn ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return nf * (-p).ln_1p();
    }
    if k == n {
        return nf * p.ln();
    }
    let x = k as f64;
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = LN_2PI + x.ln() + (-x / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`.
///
/// Degenerate `p = 0` and `p = 1` are exact point masses, so the result is
/// `0` or `-inf` rather than a NaN from `0 * ln 0`.
pub fn log_binomial_pmf(k: u64, n: u64, p: f64) -> Result<f64, DomainError> {
    check_args(k, n, p)?;
    Ok(ln_pmf(k, n, p))
}

/// `sum_{i=from}^{n} pmf(i)`, valid when `from` is at or past the mode.
fn sum_upward(from: u64, n: u64, p: f64) -> f64 {
    let mut sum = 0.0;
    for i in from..=n {
        let term = ln_pmf(i, n, p).exp();
        sum += term;
        if term <= sum * TAIL_TERM_CUTOFF {
            break;
        }
    }
    sum
}

/// `sum_{i=0}^{to} pmf(i)`, valid when `to` is at or before the mode.
fn sum_downward(to: u64, n: u64, p: f64) -> f64 {
    let mut sum = 0.0;
    for i in (0..=to).rev() {
        let term = ln_pmf(i, n, p).exp();
        sum += term;
        if term <= sum * TAIL_TERM_CUTOFF {
            break;
        }
    }
    sum
}

fn right_tail_unchecked(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 || p == 1.0 {
        return 1.0;
    }
    if p == 0.0 {
        return 0.0;
    }
    if k as f64 > n as f64 * p {
        sum_upward(k, n, p).min(1.0)
    } else {
        (1.0 - sum_downward(k - 1, n, p)).clamp(0.0, 1.0)
    }
}

fn left_tail_unchecked(k: u64, n: u64, p: f64) -> f64 {
    if k == n || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    if (k as f64) < n as f64 * p {
        sum_downward(k, n, p).min(1.0)
    } else {
        (1.0 - sum_upward(k + 1, n, p)).clamp(0.0, 1.0)
    }
}

/// `P(X >= k) = sum_{i=k}^{n} C(n,i) p^i (1-p)^(n-i)`.
pub fn binomial_right_tail(k: u64, n: u64, p: f64) -> Result<f64, DomainError> {
    check_args(k, n, p)?;
    Ok(right_tail_unchecked(k, n, p))
}

/// `P(X <= k) = sum_{i=0}^{k} C(n,i) p^i (1-p)^(n-i)`.
pub fn binomial_left_tail(k: u64, n: u64, p: f64) -> Result<f64, DomainError> {
    check_args(k, n, p)?;
    Ok(left_tail_unchecked(k, n, p))
}

/// Both tails at once.
pub fn tails(k: u64, n: u64, p: f64) -> Result<TailProbabilities, DomainError> {
    check_args(k, n, p)?;
    Ok(TailProbabilities {
        right_tail: right_tail_unchecked(k, n, p),
        left_tail: left_tail_unchecked(k, n, p),
        n,
        k,
    })
}

/// Exact test of the failure rate against `kappa` after observing `k`
/// failures in `n` trials. Returns the decision together with the tails it
/// was based on.
pub fn exact_test_with_tails(
    k: u64,
    n: u64,
    kappa: f64,
    alpha: f64,
) -> Result<(TailDecision, TailProbabilities), DomainError> {
    DomainError::check_open_unit("kappa", kappa)?;
    DomainError::check_significance(alpha)?;
    let t = tails(k, n, kappa)?;
    let decision = if t.left_tail < alpha {
        TailDecision::RejectUpper
    } else if t.right_tail < alpha {
        TailDecision::RejectLower
    } else {
        TailDecision::NoRejection
    };
    Ok((decision, t))
}

/// Exact test of the failure rate against `kappa`; see [`exact_test_with_tails`].
pub fn exact_test(k: u64, n: u64, kappa: f64, alpha: f64) -> Result<TailDecision, DomainError> {
    exact_test_with_tails(k, n, kappa, alpha).map(|(d, _)| d)
}
