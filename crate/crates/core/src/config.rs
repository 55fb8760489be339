//! Run configuration (TOML) and dataset files (CSV).
//!
//! ```toml
//! [model]
//! kind = "linear"            # linear | mlp | external
//! weights = "model.json"     # linear / mlp
//! # command = ["python3", "-m", "bridge"]   # external
//! # timeout_ms = 30000
//!
//! [dataset]
//! path = "points.csv"
//!
//! [spec]
//! kappa = 0.01
//! alpha = 0.05
//! epsilon = 0.05
//! metric = "linf"
//! batch_size = 100
//! max_samples = 1000000
//! seed = 7
//! alpha_mode = "per_look"    # or "spending"
//!
//! [output]
//! dir = "out"
//!
//! [oracle]                   # optional
//! samples = 1000000
//! method = "auto"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Datasets are CSV with a header `x0,x1,...,x{d-1}`; the header fixes the
//! dimension.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{load_weights, ExternalModel, ExternalSettings, ModelHandle, ModelKind};
use crate::oracle::{OracleChoice, MIN_ORACLE_SAMPLES};
use crate::perturbation::{InputVector, Metric};
use crate::presets::SilPreset;
use crate::sequential::{AlphaMode, RobustnessSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_samples")]
    pub samples: u64,
    #[serde(default)]
    pub method: OracleChoice,
}

fn default_oracle_samples() -> u64 {
    MIN_ORACLE_SAMPLES
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            samples: default_oracle_samples(),
            method: OracleChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub dataset: DatasetSection,
    pub spec: RobustnessSpec,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
    /// Directory the relative paths above are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides for individual keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub metric: Option<Metric>,
    pub batch_size: Option<u64>,
    pub max_samples: Option<u64>,
    pub strict_alpha: bool,
    pub sil_preset: Option<u8>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, Error> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), Error> {
        if let Some(level) = o.sil_preset {
            if o.kappa.is_some() {
                return Err(Error::Config(
                    "--kappa and --sil-preset are mutually exclusive".into(),
                ));
            }
            self.spec.kappa = SilPreset::new(level)?.kappa();
        }
        let s = &mut self.spec;
        if let Some(v) = o.seed {
            s.seed = v;
        }
        if let Some(v) = o.kappa {
            s.kappa = v;
        }
        if let Some(v) = o.alpha {
            s.alpha = v;
        }
        if let Some(v) = o.epsilon {
            s.epsilon = v;
        }
        if let Some(v) = o.metric {
            s.metric = v;
        }
        if let Some(v) = o.batch_size {
            s.batch_size = v;
        }
        if let Some(v) = o.max_samples {
            s.max_samples = v;
        }
        if o.strict_alpha {
            s.alpha_mode = AlphaMode::Spending;
        }
        if let Some(dir) = &o.out_dir {
            self.output.dir = dir.clone();
        }
        self.spec.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.dataset.path)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    /// Human-readable description of the model source for reports.
    pub fn model_source(&self) -> String {
        match (&self.model.weights, &self.model.command) {
            (Some(w), _) => w.display().to_string(),
            (None, Some(cmd)) => cmd.join(" "),
            (None, None) => String::new(),
        }
    }

    pub fn open_model(&self) -> Result<ModelHandle, Error> {
        match self.model.kind {
            ModelKind::Linear | ModelKind::Mlp => {
                let weights = self.model.weights.as_ref().ok_or_else(|| {
                    Error::Config("model.weights is required for built-in models".into())
                })?;
                let handle = load_weights(&self.resolve(weights))?;
                if handle.kind() != self.model.kind {
                    return Err(Error::Config(format!(
                        "model.kind is {} but the weights file describes a {} model",
                        self.model.kind,
                        handle.kind()
                    )));
                }
                Ok(handle)
            }
            ModelKind::External => {
                let command = self.model.command.clone().ok_or_else(|| {
                    Error::Config("model.command is required for external models".into())
                })?;
                let mut settings = ExternalSettings::new(command);
                if let Some(t) = self.model.timeout_ms {
                    settings.timeout_ms = t;
                }
                Ok(ModelHandle::External(ExternalModel::connect(&settings)?))
            }
        }
    }
}

/// Reads a dataset: header `x0,...,x{d-1}`, then one point per row.
pub fn load_dataset(path: &Path) -> Result<Vec<InputVector>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Config(format!("dataset header: {e}")))?
        .clone();
    let dim = header.len();
    if dim == 0 || header.iter().enumerate().any(|(i, h)| h != format!("x{i}")) {
        return Err(Error::Config(format!(
            "dataset header must be x0,...,x{{d-1}}, got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Config(format!("dataset row {}: {e}", row + 1)))?;
        if record.len() != dim {
            return Err(Error::Config(format!(
                "dataset row {} has {} values, header declares {dim}",
                row + 1,
                record.len()
            )));
        }
        let values = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("dataset row {}: {e}", row + 1)))?;
        points.push(
            InputVector::new(values)
                .map_err(|e| Error::Config(format!("dataset row {}: {e}", row + 1)))?,
        );
    }
    if points.is_empty() {
        return Err(Error::Config("dataset has no points".into()));
    }
    Ok(points)
}

/// Writes points in the dataset format.
pub fn write_dataset<W: std::io::Write>(out: W, points: &[InputVector]) -> Result<(), Error> {
    let dim = points.first().map_or(0, InputVector::dimension);
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..dim).map(|i| format!("x{i}")))
        .map_err(|e| Error::Internal(e.to_string()))?;
    for p in points {
        w.write_record(p.values().iter().map(|v| v.to_string()))
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
[model]
kind = "linear"
weights = "w.json"

[dataset]
path = "data/points.csv"

[spec]
kappa = 0.01
alpha = 0.05
epsilon = 0.05
seed = 9
"#;

    #[test]
    fn parse_with_defaults() {
        let cfg = RunConfig::from_toml(CFG, Path::new("/tmp/run")).unwrap();
        assert_eq!(cfg.spec.batch_size, 100);
        assert_eq!(cfg.spec.max_samples, 1_000_000);
        assert_eq!(cfg.spec.metric, Metric::Linf);
        assert_eq!(cfg.spec.alpha_mode, AlphaMode::PerLook);
        assert_eq!(cfg.dataset_path(), PathBuf::from("/tmp/run/data/points.csv"));
        assert_eq!(cfg.out_dir(), PathBuf::from("/tmp/run/out"));
        assert_eq!(cfg.oracle.samples, MIN_ORACLE_SAMPLES);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = CFG.replace("seed = 9", "seed = 9\nkapa = 0.1");
        assert!(matches!(RunConfig::from_toml(&bad, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn overrides() {
        let mut cfg = RunConfig::from_toml(CFG, Path::new(".")).unwrap();
        cfg.apply(&Overrides {
            sil_preset: Some(4),
            seed: Some(1),
            strict_alpha: true,
            metric: Some(Metric::L2),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(cfg.spec.kappa, 1e-4);
        assert_eq!(cfg.spec.seed, 1);
        assert_eq!(cfg.spec.alpha_mode, AlphaMode::Spending);
        assert_eq!(cfg.spec.metric, Metric::L2);

        let both = Overrides {
            sil_preset: Some(2),
            kappa: Some(0.1),
            ..Overrides::default()
        };
        assert!(cfg.apply(&both).is_err());
        assert!(cfg
            .apply(&Overrides {
                alpha: Some(0.7),
                ..Overrides::default()
            })
            .is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let pts = vec![
            InputVector::new(vec![0.1, 0.25]).unwrap(),
            InputVector::new(vec![1.0, 0.0]).unwrap(),
        ];
        write_dataset(fs::File::create(&path).unwrap(), &pts).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), pts);
    }

    #[test]
    fn dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("a,b\n0.1,0.2\n", "header"),
            ("x0,x1\n0.1\n", "values"),
            ("x0,x1\n0.1,1.5\n", "outside"),
            ("x0,x1\n0.1,abc\n", "row 1"),
            ("x0,x1\n", "no points"),
        ];
        for (i, (text, needle)) in cases.iter().enumerate() {
            let path = dir.path().join(format!("{i}.csv"));
            fs::write(&path, text).unwrap();
            let err = load_dataset(&path).unwrap_err();
            assert!(matches!(err, Error::Config(_)));
            assert!(err.to_string().contains(needle), "{err}");
        }
        assert!(load_dataset(&dir.path().join("missing.csv")).is_err());
    }
}
