use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use probcert::model::{load_weights, Classifier, ExternalModel, ExternalSettings, ModelHandle};
use probcert::perturbation::InputVector;
use probcert::sequential::{assess_dataset, DatasetOptions, RobustnessSpec};
use probcert::stream::{Namespace, RandomStream};
use probcert::ModelError;
use rand::Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn serve_command(weights: &str) -> Vec<String> {
    vec![
        env!("CARGO_BIN_EXE_probcert").to_string(),
        "serve".into(),
        "--weights".into(),
        fixture(weights).display().to_string(),
    ]
}

fn have_python() -> bool {
    Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success())
}

fn fake(mode: &str, arg: u32, timeout_ms: u64) -> ExternalSettings {
    let mut s = ExternalSettings::new([
        "python3".to_string(),
        fixture("fake_model.py").display().to_string(),
        mode.to_string(),
        arg.to_string(),
    ]);
    s.timeout_ms = timeout_ms;
    s
}

fn random_points(n: usize, dim: usize, seed: u64) -> Vec<InputVector> {
    let mut s = RandomStream::derive(seed, Namespace::Simulation, 0);
    (0..n)
        .map(|_| InputVector::new((0..dim).map(|_| s.random::<f64>()).collect()).unwrap())
        .collect()
}

#[test]
fn served_weights_agree_with_in_process_model() {
    let local = load_weights(&fixture("mlp_3class.json")).unwrap();
    let remote = ExternalModel::connect(&ExternalSettings::new(serve_command("mlp_3class.json"))).unwrap();
    assert_eq!((remote.input_dim(), remote.num_classes()), (2, 3));
    for (i, size) in [1usize, 7, 100, 513].into_iter().enumerate() {
        let batch = random_points(size, 2, i as u64);
        assert_eq!(remote.predict_batch(&batch).unwrap(), local.predict_batch(&batch).unwrap());
    }
    assert!(remote.predict_batch(&[]).unwrap().is_empty());
}

#[test]
fn external_assessment_matches_in_process_verdicts() {
    let local = load_weights(&fixture("linear_2d.json")).unwrap();
    let remote = ModelHandle::External(
        ExternalModel::connect(&ExternalSettings::new(serve_command("linear_2d.json"))).unwrap(),
    );
    let mut spec = RobustnessSpec::new(0.01, 0.05, 0.05);
    spec.seed = 3;
    spec.max_samples = 5_000;
    let points = random_points(24, 2, 99);
    let opts = DatasetOptions {
        workers: Some(4),
        progress: None,
    };
    let a = assess_dataset(&local, &points, &spec, &opts).unwrap();
    let b = assess_dataset(&remote, &points, &spec, &opts).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
    }
}

#[test]
fn concurrent_requests_are_routed_by_id() {
    let local = load_weights(&fixture("mlp_3class.json")).unwrap();
    let remote = ExternalModel::connect(&ExternalSettings::new(serve_command("mlp_3class.json"))).unwrap();
    std::thread::scope(|s| {
        for t in 0..8u64 {
            let (local, remote) = (&local, &remote);
            s.spawn(move || {
                for r in 0..20u64 {
                    let batch = random_points(1 + (r as usize * 13) % 50, 2, 1000 * t + r);
                    assert_eq!(remote.predict_batch(&batch).unwrap(), local.predict_batch(&batch).unwrap());
                }
            });
        }
    });
}

#[test]
fn wrong_dimension_is_a_config_error() {
    let remote = ExternalModel::connect(&ExternalSettings::new(serve_command("mlp_3class.json"))).unwrap();
    let x = InputVector::new(vec![0.5; 3]).unwrap();
    assert!(matches!(remote.predict_batch(&[x]), Err(ModelError::Config(_))));
}

#[test]
fn missing_program_is_a_transport_error() {
    let s = ExternalSettings::new(["/nonexistent/model-server"]);
    assert!(matches!(ExternalModel::connect(&s), Err(ModelError::Transport(_))));
    let empty = ExternalSettings::new(Vec::<String>::new());
    assert!(matches!(ExternalModel::connect(&empty), Err(ModelError::Config(_))));
}

#[test]
fn handshake_faults() {
    if !have_python() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let t0 = Instant::now();
    let err = ExternalModel::connect(&fake("no_handshake", 0, 300)).unwrap_err();
    assert!(matches!(err, ModelError::Transport(ref m) if m.contains("handshake")), "{err}");
    assert!(t0.elapsed() < Duration::from_secs(10));

    let err = ExternalModel::connect(&fake("bad_handshake", 0, 5_000)).unwrap_err();
    assert!(matches!(err, ModelError::Transport(ref m) if m.contains("malformed handshake")), "{err}");
}

#[test]
fn nondeterministic_model_is_rejected() {
    if !have_python() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let err = ExternalModel::connect(&fake("random", 0, 5_000)).unwrap_err();
    assert!(matches!(err, ModelError::Config(ref m) if m.contains("deterministic")), "{err}");
}

#[test]
fn reply_faults_are_transport_errors() {
    if !have_python() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let batch = random_points(5, 2, 1);
    let cases = [
        ("garbage", "malformed response"),
        ("sleep", "timed out"),
        ("short", "expected 5 labels"),
        ("bad_label", "outside"),
        ("reject", "out of memory"),
    ];
    for (mode, needle) in cases {
        let m = ExternalModel::connect(&fake(mode, 0, 500)).unwrap();
        match m.predict_batch(&batch) {
            Err(ModelError::Transport(msg)) => assert!(msg.contains(needle), "{mode}: {msg}"),
            other => panic!("{mode}: {other:?}"),
        }
    }
}

#[test]
fn process_death_fails_pending_and_later_requests() {
    if !have_python() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let m = ExternalModel::connect(&fake("die_after", 1, 5_000)).unwrap();
    let batch = random_points(3, 2, 2);
    assert_eq!(m.predict_batch(&batch).unwrap(), vec![1, 1, 1]);
    for _ in 0..3 {
        assert!(matches!(m.predict_batch(&batch), Err(ModelError::Transport(_))));
    }
}
