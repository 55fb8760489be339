//! Sequential assessment of single inputs against a linear classifier.
//!
//! Class 1 iff `x0 + x1 > 1`. Points far from the line are certified after a
//! few hundred perturbations, points on it are refuted almost at once, and
//! a point whose failure rate sits near `kappa` burns through the cap.

use probcert::model::DenseNetwork;
use probcert::perturbation::InputVector;
use probcert::sequential::{assess_point, AlphaMode, RobustnessSpec};
use probcert::stream::{Namespace, RandomStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DenseNetwork::linear(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0])?;
    let mut spec = RobustnessSpec::new(0.01, 0.05, 0.05);
    spec.max_samples = 20_000;

    // Margin at which P(label flips) is exactly kappa: (2 eps - m)^2 / (8 eps^2) = kappa.
    let (eps, kappa) = (spec.epsilon, spec.kappa);
    let m = 2.0 * eps - eps * (8.0 * kappa).sqrt();
    let points = [
        ("far", [0.2, 0.3]),
        ("on the line", [0.5, 0.5]),
        ("near kappa", [0.5, 0.5 + m]),
    ];
    for mode in [AlphaMode::PerLook, AlphaMode::Spending] {
        spec.alpha_mode = mode;
        println!("alpha mode {mode:?}");
        for (i, (name, x)) in points.iter().enumerate() {
            let x = InputVector::new(x.to_vec())?;
            let mut stream = RandomStream::derive(spec.seed, Namespace::Assessment, i as u64);
            let a = assess_point(&model, &x, &spec, &mut stream)?;
            println!(
                "  {name:<12} {:<12} n={:<6} k={:<4} left={:.3e} right={:.3e}",
                a.observation.as_str(),
                a.samples_used,
                a.failures,
                a.final_left_tail,
                a.final_right_tail
            );
        }
    }
    Ok(())
}
