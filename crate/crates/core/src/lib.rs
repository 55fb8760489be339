//! Probabilistic robustness certification for classifiers.
//!
//! Each input `x` is tested for "the chance that a random perturbation inside
//! the `epsilon` ball changes the label is at most `kappa`" with an exact
//! binomial test, drawing perturbations in batches until the test decides.
//! Per-input verdicts are then turned into bounds on the fraction of inputs
//! that really are robust.
//!
//! ```
//! use probcert::model::DenseNetwork;
//! use probcert::perturbation::InputVector;
//! use probcert::sequential::{assess_point, Observation, RobustnessSpec};
//! use probcert::stream::{Namespace, RandomStream};
//!
//! let model = DenseNetwork::constant(2, 2, 1).unwrap();
//! let x = InputVector::new(vec![0.3, 0.6]).unwrap();
//! let spec = RobustnessSpec::new(0.01, 0.05, 0.1);
//! let mut stream = RandomStream::derive(spec.seed, Namespace::Assessment, 0);
//! let verdict = assess_point(&model, &x, &spec, &mut stream).unwrap();
//! assert_eq!(verdict.observation, Observation::W1);
//! assert_eq!(verdict.samples_used, 300);
//! ```

pub mod aggregation;
pub mod binomial;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod perturbation;
pub mod presets;
pub mod report;
pub mod sequential;
pub mod stream;

pub use aggregation::{aggregate, bounds_from_observed, DatasetEstimate};
pub use binomial::{binomial_left_tail, binomial_right_tail, exact_test, TailDecision};
pub use error::{DomainError, Error, ModelError};
pub use model::{Classifier, ModelHandle, ModelKind};
pub use perturbation::{InputVector, Metric};
pub use sequential::{assess_dataset, assess_point, Observation, PointAssessment, RobustnessSpec};
