use probcert::perturbation::{sample_ball, InputVector, Metric};
use probcert::stream::{Namespace, RandomStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn draws(x: &[f64], eps: f64, metric: Metric, count: usize, index: u64) -> Vec<InputVector> {
    let x = InputVector::new(x.to_vec()).unwrap();
    let mut s = RandomStream::derive(77, Namespace::Assessment, index);
    sample_ball(&x, eps, metric, &mut s, count).unwrap()
}

#[test]
fn million_draws_stay_in_ball_and_domain() {
    let centres: [&[f64]; 5] = [
        &[0.5],
        &[0.0, 0.0, 0.0],
        &[1.0, 0.5, 0.02],
        &[0.3, 0.6, 0.9, 0.1, 0.5, 0.5, 0.5, 0.5, 0.99, 0.01],
        &[0.5, 0.5],
    ];
    for metric in [Metric::Linf, Metric::L2] {
        for (i, c) in centres.iter().enumerate() {
            let eps = 0.1;
            for p in draws(c, eps, metric, 1_000_000, i as u64) {
                assert!(metric.distance(c, p.values()) <= eps * (1.0 + 1e-12));
                assert!(p.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

#[test]
fn clipped_corner_stays_in_first_orthant() {
    for p in draws(&[0.0, 0.0, 0.0], 0.1, Metric::Linf, 10_000, 0) {
        assert!(p.values().iter().all(|v| (0.0..=0.1).contains(v)));
    }
}

fn chi_square_uniform(values: impl Iterator<Item = f64>, bins: usize) -> (f64, f64) {
    let mut counts = vec![0u64; bins];
    let mut n = 0u64;
    for v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
        n += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    (stat, critical)
}

#[test]
fn interior_linf_components_are_uniform() {
    let c = [0.3, 0.5, 0.7];
    let eps = 0.2;
    let d = draws(&c, eps, Metric::Linf, 200_000, 3);
    for (i, ci) in c.iter().enumerate() {
        let u = d.iter().map(|p| (p.values()[i] - (ci - eps)) / (2.0 * eps));
        let (stat, critical) = chi_square_uniform(u, 20);
        assert!(stat < critical, "component {i}: chi2 {stat} >= {critical}");
    }
}

#[test]
fn interior_l2_radius_has_the_uniform_ball_law() {
    // For a uniform point in a d-ball, (r / eps)^d is uniform on [0, 1].
    let c = [0.5, 0.5, 0.5, 0.5];
    let eps = 0.3;
    let d = draws(&c, eps, Metric::L2, 200_000, 4);
    let u = d.iter().map(|p| (Metric::L2.distance(&c, p.values()) / eps).powi(4));
    let (stat, critical) = chi_square_uniform(u, 20);
    assert!(stat < critical, "radius chi2 {stat} >= {critical}");

    // Direction: each coordinate is symmetric about the centre.
    for (i, ci) in c.iter().enumerate() {
        let above = d.iter().filter(|p| p.values()[i] > *ci).count() as f64 / d.len() as f64;
        assert!((above - 0.5).abs() < 4.0 * (0.25 / d.len() as f64).sqrt());
    }
}

#[test]
fn zero_radius_returns_the_centre() {
    for metric in [Metric::Linf, Metric::L2] {
        assert!(draws(&[0.2, 0.8], 0.0, metric, 100, 0)
            .iter()
            .all(|p| p.values() == [0.2, 0.8]));
    }
}
