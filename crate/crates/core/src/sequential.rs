//! Per-input sequential exact test.
//!
//! For one input `x` the assessor fixes the model's own label `h(x)`, draws
//! perturbations in batches, counts how many change the label and reruns the
//! exact binomial test after every batch. The first rejection decides the
//! observation `w`; running out of budget yields `Inconclusive`.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial::{exact_test_with_tails, TailDecision};
use crate::error::{Error, ModelError};
use crate::model::Classifier;
use crate::perturbation::{sample_ball, InputVector, Metric};
use crate::stream::{Namespace, RandomStream};

pub const DEFAULT_BATCH_SIZE: u64 = 100;
pub const DEFAULT_MAX_SAMPLES: u64 = 1_000_000;

/// How the significance level is applied across repeated looks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Every look is tested at the full `alpha`.
    #[default]
    PerLook,
    /// Look `j` (from 1) is tested at `alpha * 2^-j`, so the levels sum to `alpha`.
    Spending,
}

/// The certification contract for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    /// Tolerated fraction of label-changing perturbations.
    pub kappa: f64,
    /// Per-test error bound.
    pub alpha: f64,
    /// Perturbation radius.
    pub epsilon: f64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_batch_size")]
    pub batch_size: u64,
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha_mode: AlphaMode,
}

fn default_batch_size() -> u64 {
    DEFAULT_BATCH_SIZE
}

fn default_max_samples() -> u64 {
    DEFAULT_MAX_SAMPLES
}

impl RobustnessSpec {
    pub fn new(kappa: f64, alpha: f64, epsilon: f64) -> Self {
        Self {
            kappa,
            alpha,
            epsilon,
            metric: Metric::Linf,
            batch_size: DEFAULT_BATCH_SIZE,
            max_samples: DEFAULT_MAX_SAMPLES,
            seed: 0,
            alpha_mode: AlphaMode::PerLook,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa = {} must lie in (0, 1)", self.kappa));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha = {} must lie in (0, 0.5)", self.alpha));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be finite and >= 0", self.epsilon));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_samples < self.batch_size {
            return bad(format!(
                "max_samples = {} is smaller than batch_size = {}",
                self.max_samples, self.batch_size
            ));
        }
        Ok(())
    }

    /// Significance used at look `look` (1-based).
    pub fn alpha_at_look(&self, look: u32) -> f64 {
        match self.alpha_mode {
            AlphaMode::PerLook => self.alpha,
            AlphaMode::Spending => self.alpha * 0.5f64.powi(look as i32),
        }
    }
}

/// The observed per-input verdict `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    /// `w = 1`: the failure rate was shown to be below `kappa`.
    #[serde(rename = "robust")]
    W1,
    /// `w = 0`: the failure rate was shown to exceed `kappa`.
    #[serde(rename = "non_robust")]
    W0,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Observation {
    pub fn as_str(self) -> &'static str {
        match self {
            Observation::W1 => "robust",
            Observation::W0 => "non_robust",
            Observation::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAssessment {
    pub observation: Observation,
    /// Perturbations drawn, `n`.
    pub samples_used: u64,
    /// Perturbations whose label differed from `center_label`, `k`.
    pub failures: u64,
    pub final_left_tail: f64,
    pub final_right_tail: f64,
    pub center_label: usize,
}

/// Runs the stopping rule against an arbitrary failure source.
///
/// `next_batch(m)` must draw `m` fresh trials and return how many failed.
/// This is the whole procedure minus the model; [`assess_point`] plugs in
/// perturbations and predictions.
pub fn assess_with<E, F>(
    spec: &RobustnessSpec,
    center_label: usize,
    mut next_batch: F,
) -> Result<PointAssessment, E>
where
    F: FnMut(u64) -> Result<u64, E>,
    E: From<crate::error::DomainError>,
{
    let mut n = 0u64;
    let mut k = 0u64;
    let mut look = 0u32;
    loop {
        let m = spec.batch_size.min(spec.max_samples - n);
        let failed = next_batch(m)?;
        debug_assert!(failed <= m);
        n += m;
        k += failed;
        look = look.saturating_add(1);
        let (decision, tails) =
            exact_test_with_tails(k, n, spec.kappa, spec.alpha_at_look(look).max(f64::MIN_POSITIVE))?;
        let observation = match decision {
            TailDecision::RejectUpper => Some(Observation::W1),
            TailDecision::RejectLower => Some(Observation::W0),
            TailDecision::NoRejection if n >= spec.max_samples => Some(Observation::Inconclusive),
            TailDecision::NoRejection => None,
        };
        if let Some(observation) = observation {
            return Ok(PointAssessment {
                observation,
                samples_used: n,
                failures: k,
                final_left_tail: tails.left_tail,
                final_right_tail: tails.right_tail,
                center_label,
            });
        }
    }
}

/// Assesses one input against `model`, drawing perturbations from `stream`.
///
/// Issues at most `max_samples + 1` model queries: one for `h(x)` and one
/// per perturbation.
pub fn assess_point<C: Classifier + ?Sized>(
    model: &C,
    x: &InputVector,
    spec: &RobustnessSpec,
    stream: &mut RandomStream,
) -> Result<PointAssessment, ModelError> {
    spec.validate().map_err(|e| ModelError::Config(e.to_string()))?;
    if x.dimension() != model.input_dim() {
        return Err(ModelError::Config(format!(
            "input has dimension {}, model expects {}",
            x.dimension(),
            model.input_dim()
        )));
    }
    let center_label = single_label(model.predict_batch(std::slice::from_ref(x))?)?;
    assess_with(spec, center_label, |m| {
        let batch = sample_ball(x, spec.epsilon, spec.metric, stream, m as usize)?;
        let labels = model.predict_batch(&batch)?;
        if labels.len() != batch.len() {
            return Err(ModelError::Transport(format!(
                "model returned {} labels for {} inputs",
                labels.len(),
                batch.len()
            )));
        }
        Ok(labels.iter().filter(|&&l| l != center_label).count() as u64)
    })
}

fn single_label(labels: Vec<usize>) -> Result<usize, ModelError> {
    match labels.as_slice() {
        [l] => Ok(*l),
        other => Err(ModelError::Transport(format!(
            "model returned {} labels for 1 input",
            other.len()
        ))),
    }
}

/// One completed point, as reported to progress observers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressEvent {
    pub index: usize,
    /// `None` when the point failed with a transport error.
    pub observation: Option<Observation>,
    pub samples_used: u64,
    pub failures: u64,
    pub completed: usize,
    pub total: usize,
    pub robust: usize,
    pub non_robust: usize,
    pub inconclusive: usize,
    pub errors: usize,
}

/// Options for [`assess_dataset`].
#[derive(Default)]
pub struct DatasetOptions<'a> {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub progress: Option<&'a (dyn Fn(&ProgressEvent) + Sync)>,
}

pub type PointOutcome = Result<PointAssessment, ModelError>;

#[derive(Default)]
struct Counters {
    completed: AtomicUsize,
    robust: AtomicUsize,
    non_robust: AtomicUsize,
    inconclusive: AtomicUsize,
    errors: AtomicUsize,
}

/// Assesses every point, in parallel, returning outcomes in input order.
///
/// Point `i` draws from the stream `(spec.seed, Assessment, i)`, so results
/// do not depend on the worker count. Transport failures are kept per point;
/// the call only fails if the input is malformed or every point failed.
pub fn assess_dataset<C: Classifier + ?Sized>(
    model: &C,
    points: &[InputVector],
    spec: &RobustnessSpec,
    options: &DatasetOptions<'_>,
) -> Result<Vec<PointOutcome>, Error> {
    let outcomes = assess_each(model, points, spec, options)?;
    check_outcomes(&outcomes)?;
    Ok(outcomes)
}

/// Like [`assess_dataset`] but hands back the outcomes even when every
/// point failed, so callers can record them first.
pub fn assess_each<C: Classifier + ?Sized>(
    model: &C,
    points: &[InputVector],
    spec: &RobustnessSpec,
    options: &DatasetOptions<'_>,
) -> Result<Vec<PointOutcome>, Error> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::Config("dataset has no points".into()));
    }
    if let Some((i, p)) = points
        .iter()
        .enumerate()
        .find(|(_, p)| p.dimension() != model.input_dim())
    {
        return Err(Error::Config(format!(
            "point {i} has dimension {}, model expects {}",
            p.dimension(),
            model.input_dim()
        )));
    }

    let counters = Counters::default();
    let total = points.len();
    let run_one = |(index, x): (usize, &InputVector)| -> PointOutcome {
        let mut stream = RandomStream::derive(spec.seed, Namespace::Assessment, index as u64);
        let outcome = assess_point(model, x, spec, &mut stream);
        let event = record(&counters, index, total, &outcome);
        log_event(&event);
        if let Some(cb) = options.progress {
            cb(&event);
        }
        outcome
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = options.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Internal(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().enumerate().map(run_one).collect()))
}

/// Fails on a per-point configuration error or when no point succeeded.
pub fn check_outcomes(outcomes: &[PointOutcome]) -> Result<(), Error> {
    if let Some(Err(e)) = outcomes.iter().find(|o| matches!(o, Err(ModelError::Config(_)))) {
        return Err(Error::Config(e.to_string()));
    }
    if outcomes.iter().all(Result::is_err) {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .map(ToString::to_string)
            .unwrap_or_default();
        return Err(Error::Transport(format!("every point failed; first error: {first}")));
    }
    Ok(())
}

fn record(c: &Counters, index: usize, total: usize, outcome: &PointOutcome) -> ProgressEvent {
    match outcome {
        Ok(a) => match a.observation {
            Observation::W1 => c.robust.fetch_add(1, Ordering::SeqCst),
            Observation::W0 => c.non_robust.fetch_add(1, Ordering::SeqCst),
            Observation::Inconclusive => c.inconclusive.fetch_add(1, Ordering::SeqCst),
        },
        Err(_) => c.errors.fetch_add(1, Ordering::SeqCst),
    };
    let completed = c.completed.fetch_add(1, Ordering::SeqCst) + 1;
    ProgressEvent {
        index,
        observation: outcome.as_ref().ok().map(|a| a.observation),
        samples_used: outcome.as_ref().map_or(0, |a| a.samples_used),
        failures: outcome.as_ref().map_or(0, |a| a.failures),
        completed,
        total,
        robust: c.robust.load(Ordering::SeqCst),
        non_robust: c.non_robust.load(Ordering::SeqCst),
        inconclusive: c.inconclusive.load(Ordering::SeqCst),
        errors: c.errors.load(Ordering::SeqCst),
    }
}

fn log_event(e: &ProgressEvent) {
    info!(
        target: "probcert::progress",
        "point={} verdict={} n={} k={} completed={}/{} robust={} non_robust={} inconclusive={} errors={}",
        e.index,
        e.observation.map_or("error", Observation::as_str),
        e.samples_used,
        e.failures,
        e.completed,
        e.total,
        e.robust,
        e.non_robust,
        e.inconclusive,
        e.errors
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseNetwork;
    use rand::Rng;
    use std::sync::atomic::AtomicU64;
    use std::sync::Mutex;

    fn spec(batch: u64) -> RobustnessSpec {
        RobustnessSpec {
            batch_size: batch,
            ..RobustnessSpec::new(0.01, 0.05, 0.1)
        }
    }

    fn center() -> InputVector {
        InputVector::new(vec![0.5, 0.5]).unwrap()
    }

    /// Labels the exact center 0 and everything else 1.
    struct Inverted(Vec<f64>);

    impl Classifier for Inverted {
        fn input_dim(&self) -> usize {
            self.0.len()
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
            Ok(batch.iter().map(|x| usize::from(x.values() != self.0.as_slice())).collect())
        }
    }

    struct Counting<C> {
        inner: C,
        queries: AtomicU64,
    }

    impl<C: Classifier> Classifier for Counting<C> {
        fn input_dim(&self) -> usize {
            self.inner.input_dim()
        }
        fn num_classes(&self) -> usize {
            self.inner.num_classes()
        }
        fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
            self.queries.fetch_add(batch.len() as u64, Ordering::SeqCst);
            self.inner.predict_batch(batch)
        }
    }

    #[test]
    fn constant_model_is_robust_after_299() {
        let model = DenseNetwork::constant(2, 3, 1).unwrap();
        for batch in [1u64, 7, 100] {
            let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
            let a = assess_point(&model, &center(), &spec(batch), &mut s).unwrap();
            assert_eq!(a.observation, Observation::W1);
            assert_eq!(a.samples_used, 299u64.div_ceil(batch) * batch);
            assert_eq!(a.failures, 0);
            assert_eq!(a.center_label, 1);
            assert!(a.final_left_tail < 0.05);
        }
    }

    #[test]
    fn inverted_model_fails_after_first_batch() {
        let model = Inverted(center().into_values());
        let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
        let a = assess_point(&model, &center(), &spec(10), &mut s).unwrap();
        assert_eq!(a.observation, Observation::W0);
        assert_eq!(a.samples_used, 10);
        assert_eq!(a.failures, 10);
        assert!(a.final_right_tail < 1e-19);
    }

    #[test]
    fn zero_radius_is_robust() {
        let model = Inverted(center().into_values());
        let mut sp = spec(50);
        sp.epsilon = 0.0;
        let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
        let a = assess_point(&model, &center(), &sp, &mut s).unwrap();
        assert_eq!(a.observation, Observation::W1);
        assert_eq!(a.failures, 0);
    }

    #[test]
    fn inconclusive_respects_cap_exactly() {
        let mut sp = spec(100);
        sp.max_samples = 250;
        // One failure per 100: k/n = kappa, never decisive at this size.
        let a = assess_with::<ModelError, _>(&sp, 0, |m| Ok(u64::from(m >= 50))).unwrap();
        assert_eq!(a.observation, Observation::Inconclusive);
        assert_eq!(a.samples_used, 250);
        assert_eq!(a.failures, 3);
    }

    #[test]
    fn query_budget() {
        let model = Counting {
            inner: DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.0, -0.5]).unwrap(),
            queries: AtomicU64::new(0),
        };
        let mut sp = spec(64);
        sp.max_samples = 1_000;
        // Center sits on the boundary: half the perturbations flip.
        let x = InputVector::new(vec![0.5, 0.5]).unwrap();
        let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
        let a = assess_point(&model, &x, &sp, &mut s).unwrap();
        assert_eq!(a.observation, Observation::W0);
        assert_eq!(model.queries.load(Ordering::SeqCst), a.samples_used + 1);
        assert!(a.samples_used <= sp.max_samples);
    }

    #[test]
    fn dimension_mismatch_is_config() {
        let model = DenseNetwork::constant(3, 2, 0).unwrap();
        let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
        assert!(matches!(
            assess_point(&model, &center(), &spec(10), &mut s),
            Err(ModelError::Config(_))
        ));
        assert!(matches!(
            assess_dataset(&model, &[center()], &spec(10), &DatasetOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(10).validate().is_ok());
        for bad in [
            RobustnessSpec { kappa: 0.0, ..spec(10) },
            RobustnessSpec { kappa: 1.0, ..spec(10) },
            RobustnessSpec { alpha: 0.5, ..spec(10) },
            RobustnessSpec { epsilon: -1.0, ..spec(10) },
            RobustnessSpec { batch_size: 0, ..spec(10) },
            RobustnessSpec { max_samples: 5, ..spec(10) },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn spending_schedule() {
        let mut sp = spec(10);
        sp.alpha_mode = AlphaMode::Spending;
        assert_eq!(sp.alpha_at_look(1), 0.025);
        assert_eq!(sp.alpha_at_look(3), 0.05 / 8.0);
        let total: f64 = (1..60).map(|j| sp.alpha_at_look(j)).sum();
        assert!((total - 0.05).abs() < 1e-15);
        // Spending needs more evidence than per-look testing.
        let model = DenseNetwork::constant(2, 2, 0).unwrap();
        let mut s = RandomStream::derive(0, Namespace::Assessment, 0);
        let a = assess_point(&model, &center(), &RobustnessSpec { batch_size: 1, ..sp }, &mut s).unwrap();
        assert_eq!(a.observation, Observation::W1);
        assert!(a.samples_used > 299);
    }

    #[test]
    fn dataset_of_copies() {
        let model = DenseNetwork::constant(2, 2, 0).unwrap();
        let points = vec![center(); 10];
        let events = Mutex::new(Vec::new());
        let cb = |e: &ProgressEvent| events.lock().unwrap().push(e.clone());
        let opts = DatasetOptions {
            workers: Some(3),
            progress: Some(&cb),
        };
        let out = assess_dataset(&model, &points, &spec(100), &opts).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|o| o.as_ref().unwrap().observation == Observation::W1));
        let events = events.into_inner().unwrap();
        assert_eq!(events.len(), 10);
        let last = events.iter().max_by_key(|e| e.completed).unwrap();
        assert_eq!((last.completed, last.robust), (10, 10));
    }

    #[test]
    fn empty_dataset_is_config_error() {
        let model = DenseNetwork::constant(2, 2, 0).unwrap();
        assert!(matches!(
            assess_dataset(&model, &[], &spec(10), &DatasetOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let model = DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0]).unwrap();
        let mut g = RandomStream::derive(5, Namespace::Simulation, 0);
        let points: Vec<InputVector> = (0..24)
            .map(|_| InputVector::new(vec![0.1 + 0.8 * g.random::<f64>(), 0.1 + 0.8 * g.random::<f64>()]).unwrap())
            .collect();
        let run = |w| {
            assess_dataset(&model, &points, &spec(50), &DatasetOptions { workers: Some(w), progress: None })
                .unwrap()
                .into_iter()
                .map(Result::unwrap)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(8));
    }

    struct Broken;

    impl Classifier for Broken {
        fn input_dim(&self) -> usize {
            2
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
            if batch[0].values()[0] > 0.5 {
                Err(ModelError::Transport("pipe closed".into()))
            } else {
                Ok(vec![0; batch.len()])
            }
        }
    }

    #[test]
    fn transport_errors_are_per_point() {
        let lo = InputVector::new(vec![0.2, 0.2]).unwrap();
        let hi = InputVector::new(vec![0.9, 0.9]).unwrap();
        let out = assess_dataset(&Broken, &[lo, hi.clone()], &spec(10), &DatasetOptions::default()).unwrap();
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(ModelError::Transport(_))));
        assert!(matches!(
            assess_dataset(&Broken, &[hi], &spec(10), &DatasetOptions::default()),
            Err(Error::Transport(_))
        ));
    }
}
