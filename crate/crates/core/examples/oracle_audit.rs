//! Checking verdicts against the true failure rate.
//!
//! For a binary linear model under Linf the exact `p_x` has a closed form
//! (a CDF of a sum of uniforms); elsewhere the oracle falls back to a
//! million fresh Monte Carlo draws.

use probcert::cli::{audit, AgreementTable};
use probcert::model::{DenseNetwork, ModelHandle};
use probcert::oracle::{oracle_p_fail, OracleChoice, OracleOptions};
use probcert::perturbation::InputVector;
use probcert::sequential::RobustnessSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelHandle::from_network(DenseNetwork::linear(
        vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        vec![0.0, -1.0],
    )?);
    let spec = RobustnessSpec::new(0.01, 0.05, 0.05);
    let points: Vec<InputVector> = (0..40)
        .map(|i| {
            let t = 0.3 + 0.01 * i as f64;
            InputVector::new(vec![t, 0.52])
        })
        .collect::<Result<_, _>>()?;

    let rows = audit(&model, &points, &spec, &OracleOptions::default(), None)?;
    for r in rows.iter().step_by(4) {
        println!(
            "x0={:.2} p_x={:.5} z={} verdict={}",
            points[r.index].values()[0],
            r.oracle.p_x,
            r.oracle.z,
            r.verdict.as_str()
        );
    }
    let t = AgreementTable::from_rows(&rows);
    println!("z=true : {:?}", t.counts[0]);
    println!("z=false: {:?}", t.counts[1]);
    println!("wrong {} of {} decided", t.wrong(), t.decided());

    // Both routes on one point.
    let x = &points[15];
    for choice in [OracleChoice::Analytic, OracleChoice::BruteForce] {
        let o = oracle_p_fail(&model, x, &spec, &OracleOptions { choice, ..OracleOptions::default() })?;
        println!("{choice:?}: p_x = {:.5} +- {:.5}", o.p_x, o.std_error);
    }
    Ok(())
}
