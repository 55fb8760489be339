//! Inputs and draws from their epsilon-neighbourhood.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::stream::RandomStream;

/// A point of the input domain `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InputVector(Vec<f64>);

impl InputVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DomainError> {
        if values.is_empty() {
            return Err(DomainError::OutOfRange {
                name: "dimension",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        for &v in &values {
            DomainError::check_probability("input component", v)?;
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for InputVector {
    type Error = DomainError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<InputVector> for Vec<f64> {
    fn from(v: InputVector) -> Self {
        v.0
    }
}

/// Distance used to define the neighbourhood.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Linf,
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Linf => diffs.fold(0.0, f64::max),
            Metric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Linf => f.write_str("linf"),
            Metric::L2 => f.write_str("l2"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linf" => Ok(Metric::Linf),
            "l2" => Ok(Metric::L2),
            other => Err(format!("unknown metric {other:?} (expected linf or l2)")),
        }
    }
}

/// Whether the epsilon-box around `x` pokes outside `[0, 1]^d`, i.e. whether
/// clipping can move any sample.
pub fn box_is_clipped(x: &InputVector, epsilon: f64) -> bool {
    x.values().iter().any(|&v| v - epsilon < 0.0 || v + epsilon > 1.0)
}

/// Draws `count` points `x'` with `d(x, x') <= epsilon`, clipped to `[0, 1]`.
///
/// `Linf` samples every component uniformly from `[x_i - eps, x_i + eps]`;
/// `L2` samples uniformly from the Euclidean ball. Clipping only ever shrinks
/// per-component offsets, so the metric bound survives it.
pub fn sample_ball(
    x: &InputVector,
    epsilon: f64,
    metric: Metric,
    stream: &mut RandomStream,
    count: usize,
) -> Result<Vec<InputVector>, DomainError> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(DomainError::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: "[0, inf)",
        });
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(sample_one(x.values(), epsilon, metric, stream));
    }
    Ok(out)
}

fn sample_one(x: &[f64], epsilon: f64, metric: Metric, stream: &mut RandomStream) -> InputVector {
    if epsilon == 0.0 {
        return InputVector(x.to_vec());
    }
    let offsets: Vec<f64> = match metric {
        Metric::Linf => x
            .iter()
            .map(|_| epsilon * (2.0 * stream.random::<f64>() - 1.0))
            .collect(),
        Metric::L2 => {
            let mut dir: Vec<f64> = loop {
                let d: Vec<f64> = x.iter().map(|_| stream.sample(StandardNormal)).collect();
                if d.iter().any(|&v: &f64| v != 0.0) {
                    break d;
                }
            };
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = epsilon * stream.random::<f64>().powf(1.0 / x.len() as f64);
            for v in &mut dir {
                *v *= radius / norm;
            }
            dir
        }
    };
    let values = x
        .iter()
        .zip(offsets)
        .map(|(&c, off)| {
            let lo = (c - epsilon).max(0.0);
            let hi = (c + epsilon).min(1.0);
            (c + off).clamp(lo, hi)
        })
        .collect();
    InputVector(values)
}
