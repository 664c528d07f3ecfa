use std::fs;
use std::path::Path;

use nilm_limits::experiment::OutputFormat;
use nilm_limits::{
    pairwise_success_probability, run_noise_sweep, run_nway, Error, Experiment, NoiseModel,
};

fn write(dir: &Path, name: &str, body: &str) {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(path, body).unwrap();
}

#[test]
fn scenario_files_and_signals_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "signals/heater.csv", "time,amps\n0,1.0\n0.5,2.0\n1.0,2.0\n");
    write(
        dir.path(),
        "scenarios/set.json",
        r#"{"T": 6, "sample_rate_hz": 2, "scenarios": [
            {"name": "off"},
            {"name": "heater", "components": [{"source": {"file": "../signals/heater.csv"}, "shift": 2}]}
        ]}"#,
    );
    write(dir.path(), "run/config.json", r#"{"scenario_files": ["../scenarios/set.json"], "sigma2": [1.0]}"#);

    let exp = Experiment::load(dir.path().join("run/config.json")).unwrap();
    assert_eq!(exp.means[1].mean, vec![0.0, 0.0, 1.0, 2.0, 2.0, 0.0]);
    assert_eq!(exp.sample_rate_hz, 2.0);

    let table = run_noise_sweep(&exp).unwrap();
    // Distance 3, unit variance.
    assert!((table.rows[0].probability - 0.933_192_798_731_141_9).abs() < 1e-14);
}

#[test]
fn covariance_file_is_scaled_by_sigma2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cov.csv", "2.0, 0.5\n0.5, 1.0\n");
    write(
        dir.path(),
        "config.json",
        r#"{"T": 2, "sample_rate_hz": 1,
            "scenarios": [{"name": "a"}, {"name": "b", "components": [{"source": {"pulse": {"amplitude": 1, "onset": 0, "duration": 2}}}]}],
            "covariance_file": "cov.csv", "sigma2": [0.5, 2.0]}"#,
    );
    let exp = Experiment::load(dir.path().join("config.json")).unwrap();
    let table = run_noise_sweep(&exp).unwrap();
    for row in &table.rows {
        let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]) * row.x;
        let direct = pairwise_success_probability(
            &exp.means[0],
            &exp.means[1],
            &NoiseModel::full(cov).unwrap(),
            &exp.prior,
        )
        .unwrap();
        assert_eq!(row.probability, direct);
    }
}

#[test]
fn missing_and_malformed_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Experiment::load(dir.path().join("absent.json")), Err(Error::Io { .. })));

    write(dir.path(), "bad.json", "{ not json");
    assert!(matches!(Experiment::load(dir.path().join("bad.json")), Err(Error::Json(_))));

    write(dir.path(), "sig.csv", "0,1\n1,oops\n");
    write(
        dir.path(),
        "cfg.json",
        r#"{"T": 2, "sample_rate_hz": 1, "scenarios": [{"name": "a"}, {"name": "b", "components": [{"source": {"file": "sig.csv"}}]}]}"#,
    );
    assert!(matches!(Experiment::load(dir.path().join("cfg.json")), Err(Error::Parse { .. })));
}

#[test]
fn duplicate_means_are_rejected_for_nway() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"T": 2, "sample_rate_hz": 1, "scenarios": [{"name": "a"}, {"name": "b"}, {"name": "c", "components": [{"source": {"pulse": {"amplitude": 1, "onset": 0, "duration": 1}}}]}]}"#,
    );
    let exp = Experiment::load(dir.path().join("cfg.json")).unwrap();
    assert!(matches!(run_nway(&exp), Err(Error::DuplicateMean { .. })));
}

#[test]
fn shipped_kitchen_config_writes_json() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/kitchen.json");
    let mut exp = Experiment::load(cfg).unwrap();
    exp.config.mc.samples = 2_000;
    let table = run_nway(&exp).unwrap();
    assert_eq!(table.rows.len(), 5);
    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("nway.json");
    table.write(&path, OutputFormat::Json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["series"], "overall");
}
