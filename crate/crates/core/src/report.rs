//! Run records: a JSON report plus a per-point CSV table.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, DatasetEstimate};
use crate::error::{Error, ModelError};
use crate::model::ModelKind;
use crate::sequential::{PointAssessment, PointOutcome, RobustnessSpec};

pub const REPORT_FILE: &str = "report.json";
pub const POINTS_FILE: &str = "points.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: ModelKind,
    /// Weights path or command line, as written in the config.
    pub source: String,
    pub input_dim: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub path: String,
    pub points: usize,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub spec: RobustnessSpec,
    pub model: ModelDescriptor,
    pub dataset: DatasetDescriptor,
}

/// Perturbations are clipped to `[0, 1]`, which puts extra probability mass
/// on the domain faces for points whose box pokes outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationNote {
    pub domain: String,
    pub boundary_handling: String,
    pub points_with_clipping: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub index: usize,
    /// `robust`, `non_robust`, `inconclusive` or `error`.
    pub verdict: String,
    pub n: u64,
    pub k: u64,
    pub left_tail: Option<f64>,
    pub right_tail: Option<f64>,
    pub center_label: Option<usize>,
    pub error: Option<String>,
}

impl PointRow {
    pub fn from_outcome(index: usize, outcome: &PointOutcome) -> Self {
        match outcome {
            Ok(a) => Self {
                index,
                verdict: a.observation.as_str().to_string(),
                n: a.samples_used,
                k: a.failures,
                left_tail: Some(a.final_left_tail),
                right_tail: Some(a.final_right_tail),
                center_label: Some(a.center_label),
                error: None,
            },
            Err(e) => Self {
                index,
                verdict: "error".into(),
                n: 0,
                k: 0,
                left_tail: None,
                right_tail: None,
                center_label: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// The assessment this row records, unless the point errored.
    pub fn assessment(&self) -> Option<PointAssessment> {
        let observation = serde_json::from_value(serde_json::Value::String(self.verdict.clone())).ok()?;
        Some(PointAssessment {
            observation,
            samples_used: self.n,
            failures: self.k,
            final_left_tail: self.left_tail?,
            final_right_tail: self.right_tail?,
            center_label: self.center_label?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub perturbation: PerturbationNote,
    pub points: Vec<PointRow>,
    pub errors: usize,
    /// `None` when no point was decided.
    pub estimate: Option<DatasetEstimate>,
    pub duration_seconds: f64,
}

impl AssessmentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid report: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Recomputes the estimate from the per-point rows.
    pub fn recompute_estimate(&self) -> Result<DatasetEstimate, Error> {
        let decided: Vec<PointAssessment> = self.points.iter().filter_map(PointRow::assessment).collect();
        aggregate(&decided, self.config.spec.alpha)
    }

    /// One-line summary; every number is printed at full precision so it
    /// parses back to the report field exactly.
    pub fn summary(&self) -> String {
        match &self.estimate {
            Some(e) => format!(
                "p_w={} lower={} upper={} inconclusive={} errors={} n_prime={} k_prime={} | \
                 composed (exact interval on p_w): p_w_low={} p_w_high={} lower={} upper={}",
                e.p_w,
                e.lower_bound,
                e.upper_bound,
                e.inconclusive,
                self.errors,
                e.n_prime,
                e.k_prime,
                e.composed.p_w_low,
                e.composed.p_w_high,
                e.composed.lower_bound,
                e.composed.upper_bound
            ),
            None => format!(
                "no decided points: inconclusive={} errors={}",
                self.points.iter().filter(|r| r.verdict == "inconclusive").count(),
                self.errors
            ),
        }
    }
}

/// Writes `contents` to `path` via a temporary sibling and a rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn points_csv(rows: &[PointRow]) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "verdict", "n", "k", "left_tail", "right_tail", "center_label", "error"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.verdict.clone(),
            r.n.to_string(),
            r.k.to_string(),
            opt(&r.left_tail),
            opt(&r.right_tail),
            opt(&r.center_label),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

/// Errors recorded per point, by kind.
pub fn count_errors(outcomes: &[PointOutcome]) -> usize {
    outcomes
        .iter()
        .filter(|o| matches!(o, Err(ModelError::Transport(_) | ModelError::Config(_))))
        .count()
}
