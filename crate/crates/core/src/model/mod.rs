//! The classifier `h` under assessment.

pub mod dense;
pub mod external;
pub mod protocol;
pub mod weights;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dense::{Activation, DenseLayer, DenseNetwork};
pub use external::{ExternalModel, ExternalSettings};
pub use weights::{WeightsError, WeightsFile};

use crate::error::ModelError;
use crate::perturbation::InputVector;

/// Batched, deterministic prediction.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// One label in `[0, num_classes)` per input, in input order.
    fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
    External,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
            ModelKind::External => "external",
        })
    }
}

/// Uniform handle over the built-in models and external processes.
#[derive(Debug)]
pub enum ModelHandle {
    Linear(DenseNetwork),
    Mlp(DenseNetwork),
    External(ExternalModel),
}

impl ModelHandle {
    /// Wraps a network, classifying single-layer chains as linear.
    pub fn from_network(net: DenseNetwork) -> Self {
        if net.layers().len() == 1 {
            ModelHandle::Linear(net)
        } else {
            ModelHandle::Mlp(net)
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelHandle::Linear(_) => ModelKind::Linear,
            ModelHandle::Mlp(_) => ModelKind::Mlp,
            ModelHandle::External(_) => ModelKind::External,
        }
    }

    /// The built-in network, if this is not an external model.
    pub fn network(&self) -> Option<&DenseNetwork> {
        match self {
            ModelHandle::Linear(n) | ModelHandle::Mlp(n) => Some(n),
            ModelHandle::External(_) => None,
        }
    }
}

impl Classifier for ModelHandle {
    fn input_dim(&self) -> usize {
        match self {
            ModelHandle::Linear(n) | ModelHandle::Mlp(n) => n.input_dim(),
            ModelHandle::External(e) => e.input_dim(),
        }
    }

    fn num_classes(&self) -> usize {
        match self {
            ModelHandle::Linear(n) | ModelHandle::Mlp(n) => n.num_classes(),
            ModelHandle::External(e) => e.num_classes(),
        }
    }

    fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
        match self {
            ModelHandle::Linear(n) | ModelHandle::Mlp(n) => n.predict_batch(batch),
            ModelHandle::External(e) => e.predict_batch(batch),
        }
    }
}

impl Classifier for DenseNetwork {
    fn input_dim(&self) -> usize {
        DenseNetwork::input_dim(self)
    }

    fn num_classes(&self) -> usize {
        DenseNetwork::num_classes(self)
    }

    fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
        batch.iter().map(|x| self.predict(x)).collect()
    }
}

/// Loads a weights file into a validated linear or MLP handle.
pub fn load_weights(path: &Path) -> Result<ModelHandle, ModelError> {
    Ok(ModelHandle::from_network(weights::load_network(path)?))
}
