use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::perturbation::InputVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// Affine map `W x + b` followed by an activation. `weights` is row-major
/// with one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        let rows = weights.len();
        if rows == 0 {
            return Err(ModelError::Config("layer has no output rows".into()));
        }
        let cols = weights[0].len();
        if cols == 0 {
            return Err(ModelError::Config("layer has no input columns".into()));
        }
        if let Some(i) = weights.iter().position(|r| r.len() != cols) {
            return Err(ModelError::Config(format!(
                "row {i} has {} columns, expected {cols}",
                weights[i].len()
            )));
        }
        if bias.len() != rows {
            return Err(ModelError::Config(format!(
                "bias has {} entries, expected {rows}",
                bias.len()
            )));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ModelError::Config("non-finite parameter".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let s = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                match self.activation {
                    Activation::Relu => s.max(0.0),
                    Activation::None => s,
                }
            })
            .collect()
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// A chain of dense layers ending in raw class scores. A single-layer chain
/// is a linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        let Some(last) = layers.last() else {
            return Err(ModelError::Config("empty layer list".into()));
        };
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(ModelError::Config(format!(
                    "shape chain broken between layer {i} ({} outputs) and layer {} ({} inputs)",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if last.activation() != Activation::None {
            return Err(ModelError::Config(
                "final layer must have activation \"none\"".into(),
            ));
        }
        if last.outputs() < 2 {
            return Err(ModelError::Config("need at least two classes".into()));
        }
        Ok(Self { layers })
    }

    /// Single-layer linear classifier `argmax(W x + b)`.
    pub fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(vec![DenseLayer::new(weights, bias, Activation::None)?])
    }

    /// Linear model that always answers `label`.
    pub fn constant(input_dim: usize, num_classes: usize, label: usize) -> Result<Self, ModelError> {
        if label >= num_classes {
            return Err(ModelError::Config(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        let weights = vec![vec![0.0; input_dim]; num_classes];
        let bias = (0..num_classes)
            .map(|c| if c == label { 1.0 } else { 0.0 })
            .collect();
        Self::linear(weights, bias)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(&h);
        }
        h
    }

    pub fn predict(&self, x: &InputVector) -> Result<usize, ModelError> {
        if x.dimension() != self.input_dim() {
            return Err(ModelError::Config(format!(
                "input has dimension {}, model expects {}",
                x.dimension(),
                self.input_dim()
            )));
        }
        Ok(argmax(&self.scores(x.values())))
    }
}
