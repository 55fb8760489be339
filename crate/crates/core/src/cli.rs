//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use crate::aggregation::{aggregate, estimate_from_counts};
use crate::config::{load_dataset, write_dataset, Overrides, RunConfig};
use crate::error::Error;
use crate::model::{protocol, Classifier, ModelHandle};
use crate::oracle::{oracle_p_fail, OracleOptions, OraclePoint};
use crate::perturbation::{box_is_clipped, sample_ball, InputVector, Metric};
use crate::report::{
    count_errors, points_csv, write_atomic, AssessmentReport, ConfigEcho, DatasetDescriptor,
    ModelDescriptor, PerturbationNote, PointRow, POINTS_FILE, REPORT_FILE,
};
use crate::sequential::{
    assess_each, check_outcomes, DatasetOptions, Observation, PointAssessment, RobustnessSpec,
};
use crate::stream::{Namespace, RandomStream};

pub const LOG_ENV: &str = "PROBCERT_LOG";

#[derive(Debug, Parser)]
#[command(name = "probcert", version, about = "Probabilistic robustness certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assess every point of a dataset and write a report.
    Assess(RunArgs),
    /// Bounds on P(z) from robust/decided counts.
    Bounds {
        #[arg(long = "k-prime")]
        k_prime: u64,
        #[arg(long = "n-prime")]
        n_prime: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Compare verdicts with the true per-point failure rate.
    Oracle(RunArgs),
    /// Dump perturbations as CSV.
    Sample(SampleArgs),
    /// Answer the line protocol on stdin/stdout for a weights file.
    Serve {
        #[arg(long)]
        weights: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<u64>,
    #[arg(long = "max-samples")]
    pub max_samples: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Test look `j` at `alpha * 2^-j`.
    #[arg(long = "strict-alpha")]
    pub strict_alpha: bool,
    #[arg(long = "sil-preset", value_parser = clap::value_parser!(u8).range(1..=5))]
    pub sil_preset: Option<u8>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

impl RunArgs {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            ..Self::default()
        }
    }

    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            kappa: self.kappa,
            alpha: self.alpha,
            epsilon: self.epsilon,
            metric: self.metric,
            batch_size: self.batch_size,
            max_samples: self.max_samples,
            strict_alpha: self.strict_alpha,
            sil_preset: self.sil_preset,
            out_dir: self.out_dir.clone(),
        }
    }

    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Take the point, spec and seed from this config.
    #[arg(long, conflicts_with = "point")]
    pub config: Option<PathBuf>,
    /// Dataset row to perturb when a config is given.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Comma-separated centre, e.g. `0.2,0.7`.
    #[arg(long, value_delimiter = ',')]
    pub point: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging();
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("probcert: {e}");
            e.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Error> {
    match cli.command {
        Command::Assess(args) => {
            cmd_assess(&args, out)?;
        }
        Command::Bounds {
            k_prime,
            n_prime,
            alpha,
        } => cmd_bounds(k_prime, n_prime, alpha, out)?,
        Command::Oracle(args) => {
            cmd_oracle(&args, out)?;
        }
        Command::Sample(args) => cmd_sample(&args, out)?,
        Command::Serve { weights } => {
            let model = crate::model::load_weights(&weights)?;
            let stdin = io::stdin();
            protocol::serve(&model, stdin.lock(), io::stdout())?;
        }
    }
    Ok(())
}

fn describe(cfg: &RunConfig, model: &ModelHandle, points: &[InputVector]) -> ConfigEcho {
    ConfigEcho {
        spec: cfg.spec.clone(),
        model: ModelDescriptor {
            kind: model.kind(),
            source: cfg.model_source(),
            input_dim: model.input_dim(),
            num_classes: model.num_classes(),
        },
        dataset: DatasetDescriptor {
            path: cfg.dataset.path.display().to_string(),
            points: points.len(),
            dimension: points.first().map_or(0, InputVector::dimension),
        },
    }
}

/// Runs an assessment, writes `report.json` and `points.csv` into the output
/// directory and prints the summary line.
///
/// When every point fails the per-point table is still written, but no
/// report.
pub fn cmd_assess(args: &RunArgs, out: &mut dyn Write) -> Result<AssessmentReport, Error> {
    let started = Instant::now();
    let cfg = args.load()?;
    let points = load_dataset(&cfg.dataset_path())?;
    let model = cfg.open_model()?;
    let spec = &cfg.spec;

    let options = DatasetOptions {
        workers: args.workers,
        progress: None,
    };
    let outcomes = assess_each(&model, &points, spec, &options)?;
    let rows: Vec<PointRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| PointRow::from_outcome(i, o))
        .collect();

    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    write_atomic(&dir.join(POINTS_FILE), &points_csv(&rows)?)?;
    check_outcomes(&outcomes)?;

    let decided: Vec<&PointAssessment> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let estimate = match aggregate(decided.iter().copied(), spec.alpha) {
        Ok(e) => Some(e),
        Err(Error::Estimation(msg)) => {
            warn!("{msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let report = AssessmentReport {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: spec.seed,
        config: describe(&cfg, &model, &points),
        perturbation: PerturbationNote {
            domain: "[0, 1]^d".into(),
            boundary_handling: "clip".into(),
            points_with_clipping: points.iter().filter(|p| box_is_clipped(p, spec.epsilon)).count(),
        },
        points: rows,
        errors: count_errors(&outcomes),
        estimate,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_atomic(&dir.join(REPORT_FILE), report.to_json().as_bytes())?;
    writeln!(out, "{}", report.summary())?;
    info!("report written to {}", dir.display());
    if report.estimate.is_none() {
        return Err(Error::Estimation(
            "no decided observations: every point was inconclusive".into(),
        ));
    }
    Ok(report)
}

/// Prints `p_w`, lower and upper to six decimals.
pub fn cmd_bounds(k_prime: u64, n_prime: u64, alpha: f64, out: &mut dyn Write) -> Result<(), Error> {
    let e = estimate_from_counts(k_prime, n_prime, 0, alpha).map_err(|e| match e {
        Error::Estimation(msg) => Error::Config(msg),
        other => other,
    })?;
    writeln!(
        out,
        "p_w={:.6} lower={:.6} upper={:.6}",
        e.p_w, e.lower_bound, e.upper_bound
    )?;
    Ok(())
}

/// Per-point oracle row next to the assessor's verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub index: usize,
    pub oracle: OraclePoint,
    pub verdict: Observation,
}

/// Counts of verdicts split by the oracle's `z`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgreementTable {
    /// `[z = true, z = false]` x `[W1, W0, Inconclusive]`.
    pub counts: [[usize; 3]; 2],
}

impl AgreementTable {
    pub fn from_rows(rows: &[AuditRow]) -> Self {
        let mut t = Self::default();
        for r in rows {
            let col = match r.verdict {
                Observation::W1 => 0,
                Observation::W0 => 1,
                Observation::Inconclusive => 2,
            };
            t.counts[usize::from(!r.oracle.z)][col] += 1;
        }
        t
    }

    /// Decided verdicts that disagree with `z`.
    pub fn wrong(&self) -> usize {
        self.counts[0][1] + self.counts[1][0]
    }

    pub fn decided(&self) -> usize {
        self.counts.iter().map(|r| r[0] + r[1]).sum()
    }
}

/// Runs the assessor and the oracle on every point of a built-in model.
pub fn audit(
    model: &ModelHandle,
    points: &[InputVector],
    spec: &RobustnessSpec,
    oracle_options: &OracleOptions,
    workers: Option<usize>,
) -> Result<Vec<AuditRow>, Error> {
    if model.network().is_none() {
        return Err(Error::Config("oracle audit needs a built-in model".into()));
    }
    let options = DatasetOptions {
        workers,
        progress: None,
    };
    let outcomes = crate::sequential::assess_dataset(model, points, spec, &options)?;
    let oracles: Vec<OraclePoint> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let opts = OracleOptions {
                index: i as u64,
                ..*oracle_options
            };
            oracle_p_fail(model, x, spec, &opts)
        })
        .collect::<Result<_, _>>()?;
    outcomes
        .into_iter()
        .zip(oracles)
        .enumerate()
        .map(|(index, (o, oracle))| {
            Ok(AuditRow {
                index,
                oracle,
                verdict: o?.observation,
            })
        })
        .collect()
}

pub fn cmd_oracle(args: &RunArgs, out: &mut dyn Write) -> Result<Vec<AuditRow>, Error> {
    let cfg = args.load()?;
    if cfg.model.kind == crate::model::ModelKind::External {
        return Err(Error::Config(
            "oracle audit is unsupported for external models".into(),
        ));
    }
    let points = load_dataset(&cfg.dataset_path())?;
    let model = cfg.open_model()?;
    let opts = OracleOptions {
        choice: cfg.oracle.method,
        samples: cfg.oracle.samples,
        index: 0,
    };
    let rows = audit(&model, &points, &cfg.spec, &opts, args.workers)?;
    writeln!(out, "index,p_x,z,method,std_error,verdict")?;
    for r in &rows {
        let method = serde_json::to_value(r.oracle.method)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            r.oracle.p_x,
            r.oracle.z,
            method,
            r.oracle.std_error,
            r.verdict.as_str()
        )?;
    }
    let t = AgreementTable::from_rows(&rows);
    writeln!(out)?;
    writeln!(out, "{:<10}{:>8}{:>12}{:>14}", "", "robust", "non_robust", "inconclusive")?;
    for (label, row) in [("z=true", t.counts[0]), ("z=false", t.counts[1])] {
        writeln!(out, "{:<10}{:>8}{:>12}{:>14}", label, row[0], row[1], row[2])?;
    }
    writeln!(out, "wrong={} decided={}", t.wrong(), t.decided())?;
    Ok(rows)
}

/// Draws `count` perturbations from the same stream the assessor would use
/// for the chosen point, so the output matches its first draws.
pub fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<(), Error> {
    let (x, index, mut epsilon, mut metric, mut seed) = match (&args.config, &args.point) {
        (Some(path), _) => {
            let cfg = RunConfig::load(path)?;
            let points = load_dataset(&cfg.dataset_path())?;
            let x = points.get(args.index).cloned().ok_or_else(|| {
                Error::Config(format!(
                    "index {} outside dataset of {} points",
                    args.index,
                    points.len()
                ))
            })?;
            (x, args.index, cfg.spec.epsilon, cfg.spec.metric, cfg.spec.seed)
        }
        (None, Some(v)) => {
            let x = InputVector::new(v.clone())?;
            let d = RobustnessSpec::new(0.01, 0.05, 0.0);
            (x, args.index, d.epsilon, d.metric, d.seed)
        }
        (None, None) => return Err(Error::Config("give --config or --point".into())),
    };
    if let Some(e) = args.epsilon {
        epsilon = e;
    }
    if let Some(m) = args.metric {
        metric = m;
    }
    if let Some(s) = args.seed {
        seed = s;
    }
    let mut stream = RandomStream::derive(seed, Namespace::Assessment, index as u64);
    let draws = sample_ball(&x, epsilon, metric, &mut stream, args.count)?;
    write_dataset(out, &draws)
}

/// Reads a report and blanks the duration, for byte comparisons.
pub fn masked_report(path: &Path) -> Result<String, Error> {
    let mut r = AssessmentReport::read(path)?;
    r.duration_seconds = 0.0;
    Ok(r.to_json())
}
