//! Assessing a model that lives in another process.
//!
//! The example re-launches itself with `--serve` to play the model server:
//! one JSON object per line on stdin/stdout, a `hello` handshake, then
//! `predict` requests answered with labels.

use std::io;

use probcert::model::{protocol, ExternalModel, ExternalSettings, ModelHandle};
use probcert::model::DenseNetwork;
use probcert::perturbation::InputVector;
use probcert::sequential::{assess_dataset, DatasetOptions, RobustnessSpec};

fn network() -> DenseNetwork {
    DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0]).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::args().any(|a| a == "--serve") {
        protocol::serve(&network(), io::stdin().lock(), io::stdout())?;
        return Ok(());
    }

    let me = std::env::current_exe()?.display().to_string();
    let settings = ExternalSettings::new([me, "--serve".to_string()]);
    let remote = ModelHandle::External(ExternalModel::connect(&settings)?);
    let local = ModelHandle::from_network(network());

    let points: Vec<InputVector> = [[0.2, 0.2], [0.45, 0.5], [0.5, 0.5], [0.8, 0.9]]
        .iter()
        .map(|v| InputVector::new(v.to_vec()))
        .collect::<Result<_, _>>()?;
    let spec = RobustnessSpec::new(0.01, 0.05, 0.05);
    let opts = DatasetOptions::default();
    let over_wire = assess_dataset(&remote, &points, &spec, &opts)?;
    let in_process = assess_dataset(&local, &points, &spec, &opts)?;
    for (i, (a, b)) in over_wire.iter().zip(&in_process).enumerate() {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        println!("point {i}: external {} (n={}), in-process {} (n={})",
            a.observation.as_str(), a.samples_used, b.observation.as_str(), b.samples_used);
        assert_eq!(a, b);
    }
    Ok(())
}
