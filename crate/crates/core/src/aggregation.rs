//! From per-input verdicts to bounds on the dataset-level robustness.
//!
//! Each verdict `w` is a noisy observation of the latent `z` ("this input's
//! failure rate is below kappa"), wrong with probability below `alpha` in
//! either direction. Writing `P(w)` by total probability over `z` and
//! bounding both error terms by `alpha` gives
//!
//! ```text
//! (P(w) - alpha) / (1 + alpha)  <  P(z)  <  P(w) / (1 - alpha)
//! ```
//!
//! with `P(w)` estimated as `k'/n'` over the decided inputs.

use serde::{Deserialize, Serialize};

use crate::binomial::{binomial_left_tail, binomial_right_tail};
use crate::error::{DomainError, Error};
use crate::sequential::{Observation, PointAssessment};

/// `((p_w - alpha) / (1 + alpha), p_w / (1 - alpha))`, clamped to `[0, 1]`.
pub fn bounds_from_observed(p_w: f64, alpha: f64) -> Result<(f64, f64), DomainError> {
    DomainError::check_probability("p_w", p_w)?;
    DomainError::check_significance(alpha)?;
    let lower = ((p_w - alpha) / (1.0 + alpha)).clamp(0.0, 1.0);
    let upper = (p_w / (1.0 - alpha)).clamp(0.0, 1.0);
    Ok((lower, upper))
}

/// Exact two-sided Clopper–Pearson interval for a binomial proportion at
/// confidence `1 - alpha`, found by bisection on the binomial tails.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> Result<(f64, f64), DomainError> {
    if trials == 0 {
        return Err(DomainError::OutOfRange {
            name: "trials",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    if successes > trials {
        return Err(DomainError::CountExceedsSize {
            k: successes,
            n: trials,
        });
    }
    DomainError::check_open_unit("alpha", alpha)?;
    let half = alpha / 2.0;
    // P(X >= k; p) increases with p; the lower limit is where it reaches alpha/2.
    let lower = if successes == 0 {
        0.0
    } else {
        bisect(|p| binomial_right_tail(successes, trials, p).map(|t| t < half))?
    };
    // P(X <= k; p) decreases with p; the upper limit is where it drops to alpha/2.
    let upper = if successes == trials {
        1.0
    } else {
        bisect(|p| binomial_left_tail(successes, trials, p).map(|t| t > half))?
    };
    Ok((lower, upper))
}

/// Largest `p` in `[0, 1]` for which `below(p)` still holds, assuming the
/// predicate is true on an initial segment.
fn bisect(below: impl Fn(f64) -> Result<bool, DomainError>) -> Result<f64, DomainError> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact interval on `P(w)` pushed through the same correction, so the
/// sampling noise of `k'/n'` is accounted for as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComposedInterval {
    /// Clopper–Pearson interval on `P(w)` at confidence `1 - alpha`.
    pub p_w_low: f64,
    pub p_w_high: f64,
    /// `bounds_from_observed(p_w_low).0`.
    pub lower_bound: f64,
    /// `bounds_from_observed(p_w_high).1`.
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEstimate {
    /// Decided points, `n'`.
    pub n_prime: u64,
    /// Robust verdicts, `k'`.
    pub k_prime: u64,
    /// `k' / n'`.
    pub p_w: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub inconclusive: u64,
    pub alpha: f64,
    /// `k' / (n' + inconclusive)`: undecided points counted as non-robust.
    pub conservative_p_w: f64,
    /// Supplementary; not part of the point-estimate bounds above.
    pub composed: ComposedInterval,
}

/// Builds the estimate from raw counts.
pub fn estimate_from_counts(
    k_prime: u64,
    n_prime: u64,
    inconclusive: u64,
    alpha: f64,
) -> Result<DatasetEstimate, Error> {
    DomainError::check_significance(alpha)?;
    if n_prime == 0 {
        return Err(Error::Estimation(
            "no decided observations: every point was inconclusive".into(),
        ));
    }
    if k_prime > n_prime {
        return Err(DomainError::CountExceedsSize {
            k: k_prime,
            n: n_prime,
        }
        .into());
    }
    let p_w = k_prime as f64 / n_prime as f64;
    let (lower_bound, upper_bound) = bounds_from_observed(p_w, alpha)?;
    let (p_w_low, p_w_high) = clopper_pearson(k_prime, n_prime, alpha)?;
    let composed = ComposedInterval {
        p_w_low,
        p_w_high,
        lower_bound: bounds_from_observed(p_w_low, alpha)?.0,
        upper_bound: bounds_from_observed(p_w_high, alpha)?.1,
    };
    Ok(DatasetEstimate {
        n_prime,
        k_prime,
        p_w,
        lower_bound,
        upper_bound,
        inconclusive,
        alpha,
        conservative_p_w: k_prime as f64 / (n_prime + inconclusive) as f64,
        composed,
    })
}

/// Aggregates per-point verdicts. Inconclusive points are left out of `n'`.
pub fn aggregate<'a, I>(results: I, alpha: f64) -> Result<DatasetEstimate, Error>
where
    I: IntoIterator<Item = &'a PointAssessment>,
{
    let (mut robust, mut non_robust, mut inconclusive) = (0u64, 0u64, 0u64);
    for r in results {
        match r.observation {
            Observation::W1 => robust += 1,
            Observation::W0 => non_robust += 1,
            Observation::Inconclusive => inconclusive += 1,
        }
    }
    estimate_from_counts(robust, robust + non_robust, inconclusive, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn verdict(o: Observation) -> PointAssessment {
        PointAssessment {
            observation: o,
            samples_used: 300,
            failures: 0,
            final_left_tail: 0.04,
            final_right_tail: 1.0,
            center_label: 0,
        }
    }

    fn many(w1: usize, w0: usize, inc: usize) -> Vec<PointAssessment> {
        let mut v = vec![verdict(Observation::W1); w1];
        v.extend(vec![verdict(Observation::W0); w0]);
        v.extend(vec![verdict(Observation::Inconclusive); inc]);
        v
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn bound_examples() {
        assert_eq!(bounds_from_observed(0.0, 0.05).unwrap(), (0.0, 0.0));
        assert_eq!(bounds_from_observed(0.0, 0.3).unwrap(), (0.0, 0.0));
        let (l, u) = bounds_from_observed(0.85, 0.01).unwrap();
        assert!(close(l, 0.84 / 1.01) && close(u, 0.85 / 0.99));
        assert!((l - 0.831683).abs() < 1e-6 && (u - 0.858586).abs() < 1e-6);
        let (l, u) = bounds_from_observed(1.0, 0.05).unwrap();
        assert!((l - 0.904762).abs() < 1e-6);
        assert_eq!(u, 1.0);
    }

    #[test]
    fn bound_domain_errors() {
        assert!(bounds_from_observed(1.1, 0.05).is_err());
        assert!(bounds_from_observed(-0.1, 0.05).is_err());
        assert!(bounds_from_observed(0.5, 0.5).is_err());
        assert!(bounds_from_observed(0.5, 0.0).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let e = aggregate(&many(10, 0, 0), 0.05).unwrap();
        assert_eq!(e.p_w, 1.0);
        assert!((e.lower_bound - 0.904762).abs() < 1e-6);
        assert_eq!(e.upper_bound, 1.0);

        let e = aggregate(&many(84, 16, 0), 0.01).unwrap();
        assert_eq!((e.k_prime, e.n_prime), (84, 100));
        assert!(close(e.p_w, 0.84));
        assert!(close(e.lower_bound, 0.83 / 1.01));
        assert!(close(e.upper_bound, 0.84 / 0.99));

        let e = aggregate(&many(5, 5, 10), 0.05).unwrap();
        assert_eq!(e.p_w, 0.5);
        assert_eq!(e.conservative_p_w, 0.25);
        assert_eq!(e.inconclusive, 10);
    }

    #[test]
    fn all_inconclusive_is_estimation_error() {
        assert!(matches!(aggregate(&many(0, 0, 4), 0.05), Err(Error::Estimation(_))));
        assert!(matches!(aggregate(&[], 0.05), Err(Error::Estimation(_))));
    }

    #[test]
    fn clopper_pearson_edges() {
        let (l, u) = clopper_pearson(0, 10, 0.05).unwrap();
        assert_eq!(l, 0.0);
        // Upper limit for zero successes solves (1 - p)^n = alpha/2.
        assert!((u - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12);
        let (l, u) = clopper_pearson(10, 10, 0.05).unwrap();
        assert!((l - 0.025f64.powf(0.1)).abs() < 1e-12);
        assert_eq!(u, 1.0);
        assert!(clopper_pearson(3, 0, 0.05).is_err());
        assert!(clopper_pearson(3, 2, 0.05).is_err());
    }

    #[test]
    fn composed_interval_encloses_point_bounds() {
        let e = estimate_from_counts(420, 500, 0, 0.05).unwrap();
        assert!(e.composed.p_w_low < e.p_w && e.p_w < e.composed.p_w_high);
        assert!(e.composed.lower_bound <= e.lower_bound);
        assert!(e.composed.upper_bound >= e.upper_bound);
    }

    #[test]
    fn vanishing_alpha_collapses_interval() {
        let (l, u) = bounds_from_observed(0.7, 1e-12).unwrap();
        assert!((l - 0.7).abs() < 1e-11 && (u - 0.7).abs() < 1e-11);
    }

    proptest! {
        #[test]
        fn bounds_are_ordered_and_monotone(p in 0.0f64..=1.0, dp in 0.0f64..0.2, a in 1e-6f64..0.49, da in 0.0f64..0.2) {
            let (l, u) = bounds_from_observed(p, a).unwrap();
            prop_assert!(0.0 <= l && l <= p && p <= u && u <= 1.0);
            let p2 = (p + dp).min(1.0);
            let (l2, u2) = bounds_from_observed(p2, a).unwrap();
            prop_assert!(l2 >= l && u2 >= u);
            let a2 = (a + da).min(0.499);
            let (l3, u3) = bounds_from_observed(p, a2).unwrap();
            prop_assert!(u3 - l3 >= u - l - 1e-15);
        }

        #[test]
        fn cp_interval_contains_mle(k in 0u64..200, extra in 0u64..200, a in 0.01f64..0.3) {
            let n = k + extra + 1;
            let (l, u) = clopper_pearson(k, n, a).unwrap();
            let mle = k as f64 / n as f64;
            prop_assert!(l <= mle && mle <= u);
        }
    }
}
