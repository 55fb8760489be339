//! Ground truth for the built-in models: the true per-input failure rate
//! `p_x` under the perturbation sampler, and the latent `z = (p_x <= kappa)`.
//!
//! Two independent routes:
//!
//! * `Analytic` for binary linear models under `Linf` when the box stays
//!   inside the domain. The decision margin at `x'` is `d(x) + sum_i a_i V_i`
//!   with `V_i ~ U[-1, 1]` and `a_i = eps |w_i|`, so `p_x` is a CDF value of a
//!   sum of independent uniforms, computed by convolution on a fixed grid.
//! * `BruteForceMC`: fresh draws from the sampler, on streams from a
//!   namespace the assessor never touches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Classifier, DenseNetwork, ModelHandle};
use crate::perturbation::{box_is_clipped, sample_ball, InputVector, Metric};
use crate::sequential::RobustnessSpec;
use crate::stream::{Namespace, RandomStream};

pub const MIN_ORACLE_SAMPLES: u64 = 1_000_000;
const SHARD: u64 = 1 << 16;
const GRID_CELLS: f64 = 8192.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Analytic,
    #[serde(rename = "brute_force_mc")]
    BruteForceMC,
}

/// Which route the caller wants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Analytic when supported, otherwise Monte Carlo.
    #[default]
    Auto,
    Analytic,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub p_x: f64,
    /// `p_x <= kappa`.
    pub z: bool,
    pub method: OracleMethod,
    /// Zero for the analytic route.
    pub oracle_samples: u64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub choice: OracleChoice,
    pub samples: u64,
    /// Point index; selects the oracle stream.
    pub index: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            choice: OracleChoice::Auto,
            samples: MIN_ORACLE_SAMPLES,
            index: 0,
        }
    }
}

/// Computes `p_x` for a built-in model.
pub fn oracle_p_fail(
    model: &ModelHandle,
    x: &InputVector,
    spec: &RobustnessSpec,
    options: &OracleOptions,
) -> Result<OraclePoint, Error> {
    let Some(net) = model.network() else {
        return Err(Error::Config(
            "oracle is unavailable for external models".into(),
        ));
    };
    spec.validate()?;
    if x.dimension() != net.input_dim() {
        return Err(Error::Config(format!(
            "input has dimension {}, model expects {}",
            x.dimension(),
            net.input_dim()
        )));
    }
    let analytic = analytic_supported(net, x, spec);
    let use_analytic = match options.choice {
        OracleChoice::Auto => analytic.is_ok(),
        OracleChoice::Analytic => {
            analytic.map_err(|why| Error::Config(format!("analytic oracle unavailable: {why}")))?;
            true
        }
        OracleChoice::BruteForce => false,
    };
    if use_analytic {
        let p_x = analytic_p_fail(net, x, spec);
        return Ok(OraclePoint {
            p_x,
            z: p_x <= spec.kappa,
            method: OracleMethod::Analytic,
            oracle_samples: 0,
            std_error: 0.0,
        });
    }
    let (p_x, std_error) = brute_force_p_fail(net, x, spec, options.samples, options.index)?;
    Ok(OraclePoint {
        p_x,
        z: p_x <= spec.kappa,
        method: OracleMethod::BruteForceMC,
        oracle_samples: options.samples,
        std_error,
    })
}

/// Decision margin `(w1 - w0) . x + (b1 - b0)` of a binary linear model.
fn margin_direction(net: &DenseNetwork) -> Option<(Vec<f64>, f64)> {
    if net.layers().len() != 1 || net.num_classes() != 2 {
        return None;
    }
    let layer = &net.layers()[0];
    let w = layer.weights();
    let b = layer.bias();
    let dir = w[1].iter().zip(&w[0]).map(|(a, c)| a - c).collect();
    Some((dir, b[1] - b[0]))
}

fn analytic_supported(net: &DenseNetwork, x: &InputVector, spec: &RobustnessSpec) -> Result<(), &'static str> {
    let Some((dir, _)) = margin_direction(net) else {
        return Err("needs a binary linear model");
    };
    if dir.iter().all(|&d| d == 0.0) || spec.epsilon == 0.0 {
        // Prediction cannot change; clipping and metric are irrelevant.
        return Ok(());
    }
    if spec.metric != Metric::Linf {
        return Err("needs the linf metric");
    }
    if box_is_clipped(x, spec.epsilon) {
        return Err("perturbation box is clipped at the domain boundary");
    }
    Ok(())
}

fn analytic_p_fail(net: &DenseNetwork, x: &InputVector, spec: &RobustnessSpec) -> f64 {
    let (dir, offset) = margin_direction(net).expect("checked binary linear");
    if dir.iter().all(|&d| d == 0.0) || spec.epsilon == 0.0 {
        return 0.0;
    }
    let center: f64 = dir.iter().zip(x.values()).map(|(d, v)| d * v).sum::<f64>() + offset;
    let half_widths: Vec<f64> = dir.iter().map(|d| d.abs() * spec.epsilon).collect();
    // Class 1 iff margin > 0 (ties go to class 0).
    let p_nonpositive = sum_of_uniforms_cdf(&half_widths, -center);
    let center_label = usize::from(center > 0.0);
    if center_label == 1 {
        p_nonpositive
    } else {
        1.0 - p_nonpositive
    }
}

/// `P(sum_i a_i V_i <= t)` for independent `V_i ~ U[-1, 1]`.
///
/// All but the widest term are discretized onto a common lattice (exact cell
/// masses, placed at cell centres) and convolved; the widest term's CDF is
/// then applied exactly. Absolute error is well under `1e-6`.
pub fn sum_of_uniforms_cdf(half_widths: &[f64], t: f64) -> f64 {
    let mut a: Vec<f64> = half_widths.iter().copied().filter(|&v| v > 0.0).collect();
    a.sort_by(f64::total_cmp);
    let Some(widest) = a.pop() else {
        return if t >= 0.0 { 1.0 } else { 0.0 };
    };
    let last_cdf = |s: f64| ((s + widest) / (2.0 * widest)).clamp(0.0, 1.0);
    if a.is_empty() {
        return last_cdf(t);
    }

    let span: f64 = 2.0 * a.iter().sum::<f64>();
    let h = span / GRID_CELLS;
    // pmf[j] is the mass at lattice point (first + j) * h.
    let mut first: i64 = 0;
    let mut pmf = vec![1.0];
    for &ai in &a {
        let (lo, cells) = discretize_uniform(ai, h);
        let mut next = vec![0.0; pmf.len() + cells.len() - 1];
        for (i, &p) in pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in cells.iter().enumerate() {
                next[i + j] += p * q;
            }
        }
        pmf = next;
        first += lo;
    }
    pmf.iter()
        .enumerate()
        .map(|(j, &m)| m * last_cdf(t - (first + j as i64) as f64 * h))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Cell masses of `U[-a, a]` on the lattice `{j h}` with cells
/// `[j h - h/2, j h + h/2)`. Returns the first index and the masses.
fn discretize_uniform(a: f64, h: f64) -> (i64, Vec<f64>) {
    let lo = (-a / h + 0.5).floor() as i64;
    let hi = (a / h + 0.5).floor() as i64;
    let masses = (lo..=hi)
        .map(|j| {
            let left = ((j as f64 - 0.5) * h).max(-a);
            let right = ((j as f64 + 0.5) * h).min(a);
            ((right - left) / (2.0 * a)).max(0.0)
        })
        .collect();
    (lo, masses)
}

/// Empirical failure rate over `samples` fresh perturbations, with its
/// standard error `sqrt(p (1 - p) / n)`.
pub fn brute_force_p_fail<C: Classifier + ?Sized>(
    model: &C,
    x: &InputVector,
    spec: &RobustnessSpec,
    samples: u64,
    index: u64,
) -> Result<(f64, f64), Error> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::Config(format!(
            "brute-force oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        )));
    }
    let center = model.predict_batch(std::slice::from_ref(x))?[0];
    let shards = samples.div_ceil(SHARD);
    let failures = (0..shards)
        .into_par_iter()
        .map(|shard| -> Result<u64, Error> {
            let count = SHARD.min(samples - shard * SHARD) as usize;
            let mut stream = RandomStream::derive_sub(spec.seed, Namespace::Oracle, index, shard);
            let mut failed = 0u64;
            let mut left = count;
            while left > 0 {
                let m = left.min(4096);
                let batch = sample_ball(x, spec.epsilon, spec.metric, &mut stream, m)?;
                failed += model
                    .predict_batch(&batch)?
                    .iter()
                    .filter(|&&l| l != center)
                    .count() as u64;
                left -= m;
            }
            Ok(failed)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = failures as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / samples as f64).sqrt()))
}
