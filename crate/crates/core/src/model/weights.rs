//! JSON weights files for the built-in dense models.
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "num_classes": 2,
//!   "layers": [
//!     { "shape": [3, 2], "weights": [[1, 0], [0, 1], [1, 1]], "bias": [0, 0, 0], "activation": "relu" },
//!     { "shape": [2, 3], "weights": [[1, 0, 0], [0, 1, 0]], "bias": [0, 0], "activation": "none" }
//!   ]
//! }
//! ```
//!
//! `shape` is `[rows, cols]` = `[outputs, inputs]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dense::{Activation, DenseLayer, DenseNetwork};
use crate::error::ModelError;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("cannot read weights file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse weights file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("weights file has an empty layer list")]
    Empty,
    #[error("layer {layer}: unknown activation {name:?} (expected \"relu\" or \"none\")")]
    UnknownActivation { layer: usize, name: String },
    #[error("layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<WeightsError> for ModelError {
    fn from(err: WeightsError) -> Self {
        ModelError::Config(err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub shape: [usize; 2],
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl WeightsFile {
    pub fn from_json(text: &str) -> Result<Self, WeightsError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_network(net: &DenseNetwork) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerSpec {
                shape: [l.outputs(), l.inputs()],
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
                activation: match l.activation() {
                    Activation::Relu => "relu".into(),
                    Activation::None => "none".into(),
                },
            })
            .collect();
        Self {
            input_dim: net.input_dim(),
            num_classes: net.num_classes(),
            layers,
        }
    }

    /// Validates shapes and builds the network.
    pub fn build(&self) -> Result<DenseNetwork, WeightsError> {
        if self.layers.is_empty() {
            return Err(WeightsError::Empty);
        }
        let mut expected_cols = self.input_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let [rows, cols] = spec.shape;
            let shape_err = |msg: String| WeightsError::Shape { layer: i, msg };
            if cols != expected_cols {
                return Err(shape_err(format!(
                    "expects {cols} inputs but the previous stage produces {expected_cols}"
                )));
            }
            if spec.weights.len() != rows || spec.weights.iter().any(|r| r.len() != cols) {
                return Err(shape_err(format!(
                    "weight matrix does not match declared shape [{rows}, {cols}]"
                )));
            }
            if spec.bias.len() != rows {
                return Err(shape_err(format!(
                    "bias has {} entries, declared {rows} rows",
                    spec.bias.len()
                )));
            }
            let activation = match spec.activation.as_str() {
                "relu" => Activation::Relu,
                "none" => Activation::None,
                other => {
                    return Err(WeightsError::UnknownActivation {
                        layer: i,
                        name: other.to_string(),
                    })
                }
            };
            let layer = DenseLayer::new(spec.weights.clone(), spec.bias.clone(), activation)
                .map_err(|e| shape_err(e.to_string()))?;
            layers.push(layer);
            expected_cols = rows;
        }
        if expected_cols != self.num_classes {
            return Err(WeightsError::Invalid(format!(
                "last layer has {expected_cols} outputs but num_classes = {}",
                self.num_classes
            )));
        }
        DenseNetwork::new(layers).map_err(|e| WeightsError::Invalid(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }
}

pub fn load_network(path: &Path) -> Result<DenseNetwork, WeightsError> {
    let text = fs::read_to_string(path)?;
    WeightsFile::from_json(&text)?.build()
}
