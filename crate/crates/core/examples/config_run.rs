//! A config-driven run: TOML in, `report.json` and `points.csv` out.
//!
//! Equivalent to `probcert assess --config run.toml --workers 4`.

use std::fs;

use probcert::cli::{cmd_assess, RunArgs};
use probcert::config::write_dataset;
use probcert::model::{DenseNetwork, WeightsFile};
use probcert::perturbation::InputVector;
use probcert::report::AssessmentReport;

const CONFIG: &str = r#"
[model]
kind = "linear"
weights = "model.json"

[dataset]
path = "points.csv"

[spec]
kappa = 0.01
alpha = 0.05
epsilon = 0.05
seed = 2024

[output]
dir = "out"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("probcert-run-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let net = DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0])?;
    fs::write(dir.join("model.json"), WeightsFile::from_network(&net).to_json_pretty())?;
    let points: Vec<InputVector> = (0..25)
        .map(|i| InputVector::new(vec![0.1 + 0.03 * i as f64, 0.5]))
        .collect::<Result<_, _>>()?;
    write_dataset(fs::File::create(dir.join("points.csv"))?, &points)?;
    fs::write(dir.join("run.toml"), CONFIG)?;

    let mut args = RunArgs::new(dir.join("run.toml"));
    args.workers = Some(4);
    let report = cmd_assess(&args, &mut std::io::stdout())?;

    let again = AssessmentReport::read(&dir.join("out/report.json"))?;
    assert_eq!(again, report);
    println!("{} rows, {} with clipping", again.points.len(), again.perturbation.points_with_clipping);
    println!("{}", fs::read_to_string(dir.join("out/points.csv"))?.lines().take(4).collect::<Vec<_>>().join("\n"));
    fs::remove_dir_all(&dir)?;
    Ok(())
}
