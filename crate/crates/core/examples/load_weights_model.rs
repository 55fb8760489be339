//! Building a small MLP, saving it as a weights file and loading it back.

use probcert::model::{load_weights, Activation, Classifier, DenseLayer, DenseNetwork, WeightsFile};
use probcert::perturbation::InputVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hidden = DenseLayer::new(
        vec![vec![1.0, -1.0], vec![-1.0, 1.0], vec![0.5, 0.5]],
        vec![0.0, 0.0, -0.25],
        Activation::Relu,
    )?;
    let out = DenseLayer::new(
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]],
        vec![0.0; 3],
        Activation::None,
    )?;
    let net = DenseNetwork::new(vec![hidden, out])?;

    let dir = std::env::temp_dir().join(format!("probcert-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("mlp.json");
    std::fs::write(&path, WeightsFile::from_network(&net).to_json_pretty())?;

    let model = load_weights(&path)?;
    println!("loaded {} model: {} inputs, {} classes", model.kind(), model.input_dim(), model.num_classes());
    let batch: Vec<InputVector> = [[0.9, 0.1], [0.1, 0.9], [0.5, 0.5], [0.7, 0.6]]
        .iter()
        .map(|v| InputVector::new(v.to_vec()))
        .collect::<Result<_, _>>()?;
    for (x, label) in batch.iter().zip(model.predict_batch(&batch)?) {
        println!("  {:?} -> class {label} (scores {:?})", x.values(), net.scores(x.values()));
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
