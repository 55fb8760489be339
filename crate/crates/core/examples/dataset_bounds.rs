//! Assess a whole dataset and turn the verdicts into bounds on the fraction
//! of truly robust inputs.

use probcert::aggregation::{aggregate, bounds_from_observed};
use probcert::model::DenseNetwork;
use probcert::perturbation::InputVector;
use probcert::sequential::{assess_dataset, DatasetOptions, ProgressEvent, RobustnessSpec};
use probcert::stream::{Namespace, RandomStream};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0])?;
    let mut rng = RandomStream::derive(5, Namespace::Simulation, 0);
    let points: Vec<InputVector> = (0..300)
        .map(|_| InputVector::new(vec![rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]))
        .collect::<Result<_, _>>()?;

    let mut spec = RobustnessSpec::new(0.01, 0.05, 0.05);
    spec.seed = 5;
    spec.max_samples = 50_000;
    let progress = |e: &ProgressEvent| {
        if e.completed.is_multiple_of(100) {
            eprintln!("{}/{} done ({} robust)", e.completed, e.total, e.robust);
        }
    };
    let options = DatasetOptions {
        workers: None,
        progress: Some(&progress),
    };
    let outcomes = assess_dataset(&model, &points, &spec, &options)?;
    let verdicts: Vec<_> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let e = aggregate(&verdicts, spec.alpha)?;

    println!("decided n' = {}, robust k' = {}, inconclusive = {}", e.n_prime, e.k_prime, e.inconclusive);
    println!("p_w = {:.4}", e.p_w);
    println!("P(z) in [{:.4}, {:.4}]", e.lower_bound, e.upper_bound);
    println!(
        "with sampling noise on p_w: p_w in [{:.4}, {:.4}] -> P(z) in [{:.4}, {:.4}]",
        e.composed.p_w_low, e.composed.p_w_high, e.composed.lower_bound, e.composed.upper_bound
    );
    println!("undecided counted as non-robust: p_w = {:.4}", e.conservative_p_w);

    // The bounds alone, for counts gathered elsewhere.
    let (lo, hi) = bounds_from_observed(0.842, 0.01)?;
    println!("p_w = 0.842 at alpha = 0.01 -> [{lo:.6}, {hi:.6}]");
    Ok(())
}
