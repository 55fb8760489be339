#![allow(clippy::excessive_precision)]

use probcert::aggregation::clopper_pearson;
use probcert::binomial::{binomial_left_tail, binomial_right_tail, log_binomial_pmf};
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

#[test]
fn clopper_pearson_matches_beta_quantiles() {
    for &(k, n) in &[(1u64, 10u64), (5, 10), (9, 10), (84, 100), (420, 500), (3, 1000), (9990, 10000)] {
        for &alpha in &[0.01, 0.05, 0.2] {
            let (lo, hi) = clopper_pearson(k, n, alpha).unwrap();
            let beta_lo = Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(alpha / 2.0);
            let beta_hi = Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(1.0 - alpha / 2.0);
            assert!((lo - beta_lo).abs() < 1e-8, "k={k} n={n} a={alpha}: {lo} vs {beta_lo}");
            assert!((hi - beta_hi).abs() < 1e-8, "k={k} n={n} a={alpha}: {hi} vs {beta_hi}");
        }
    }
}

#[test]
fn large_n_tails_match_regularized_beta() {
    // The incomplete-beta route loses a few digits at n = 1e6, hence 1e-8.
    for &(k, n, p) in &[
        (0u64, 299u64, 0.01),
        (10, 1_000, 0.01),
        (100, 10_000, 0.01),
        (9_800, 1_000_000, 0.01),
        (10_200, 1_000_000, 0.01),
    ] {
        let b = Binomial::new(p, n).unwrap();
        let left = b.cdf(k);
        let right = if k == 0 { 1.0 } else { b.sf(k - 1) };
        let ours_left = binomial_left_tail(k, n, p).unwrap();
        let ours_right = binomial_right_tail(k, n, p).unwrap();
        assert!((ours_left - left).abs() <= 1e-8 * left, "left k={k} n={n}: {ours_left} vs {left}");
        assert!((ours_right - right).abs() <= 1e-8 * right, "right k={k} n={n}: {ours_right} vs {right}");
    }
}

#[test]
fn large_n_tails_match_high_precision_sums() {
    // (k, n, p, P(X <= k), P(X >= k)) from 50-digit direct summation.
    let cases = [
        (9_800u64, 1_000_000u64, 0.01, 0.022212510364736621697, 0.97831742227730826763),
        (10_200, 1_000_000, 0.01, 0.97779108676307727881, 0.022742497360522087887),
        (100, 10_000, 0.01, 0.52656253405815890708, 0.51349927171675474161),
        (40, 1_000_000, 1e-5, 0.99999999999982234927, 7.3384096694458057862e-13),
    ];
    for (k, n, p, left, right) in cases {
        let l = binomial_left_tail(k, n, p).unwrap();
        let r = binomial_right_tail(k, n, p).unwrap();
        assert!((l - left).abs() <= 1e-12 * left, "left k={k} n={n}: {l} vs {left}");
        assert!((r - right).abs() <= 1e-12 * right, "right k={k} n={n}: {r} vs {right}");
    }
}

#[test]
fn symmetric_centre_splits_the_middle_mass() {
    // For p = 1/2 and even n, P(X <= n/2) = P(X >= n/2) = 1/2 + P(X = n/2)/2.
    for n in [10u64, 1_000, 1_000_000, 100_000_000] {
        let mid = log_binomial_pmf(n / 2, n, 0.5).unwrap().exp();
        let expected = 0.5 + 0.5 * mid;
        assert!((binomial_left_tail(n / 2, n, 0.5).unwrap() - expected).abs() < 1e-13, "n={n}");
        assert!((binomial_right_tail(n / 2, n, 0.5).unwrap() - expected).abs() < 1e-13, "n={n}");
    }
}
