//! Drawing perturbations from the Linf box and the L2 ball.

use probcert::perturbation::{box_is_clipped, sample_ball, InputVector, Metric};
use probcert::stream::{Namespace, RandomStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.1;
    for centre in [vec![0.5, 0.5, 0.5], vec![0.0, 0.95, 0.5]] {
        let x = InputVector::new(centre)?;
        println!("centre {:?} clipped={}", x.values(), box_is_clipped(&x, eps));
        for metric in [Metric::Linf, Metric::L2] {
            let mut stream = RandomStream::derive(42, Namespace::Assessment, 0);
            let draws = sample_ball(&x, eps, metric, &mut stream, 10_000)?;
            let max_d = draws
                .iter()
                .map(|p| metric.distance(x.values(), p.values()))
                .fold(0.0, f64::max);
            let mean: Vec<f64> = (0..x.dimension())
                .map(|i| draws.iter().map(|p| p.values()[i]).sum::<f64>() / draws.len() as f64)
                .collect();
            println!("  {metric}: max distance {max_d:.4} (eps {eps}), mean {mean:.3?}");
        }
    }

    // Same seed and index, same draws.
    let x = InputVector::new(vec![0.3, 0.7])?;
    let a = sample_ball(&x, eps, Metric::Linf, &mut RandomStream::derive(1, Namespace::Assessment, 5), 3)?;
    let b = sample_ball(&x, eps, Metric::Linf, &mut RandomStream::derive(1, Namespace::Assessment, 5), 3)?;
    assert_eq!(a, b);
    println!("reproducible: {:?}", a.iter().map(InputVector::values).collect::<Vec<_>>());
    Ok(())
}
