use std::path::Path;
use std::process::{Command, Output};

use reconlaw::datagen::Dataset;
use reconlaw::features::SavedModel;
use reconlaw::harness::{read_aggregates_csv, read_records_csv};
use reconlaw::metrics::MetricsReport;
use reconlaw::recon::{read_trace_csv, ReconState};

fn reconlaw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reconlaw"))
        .args(args)
        .env_remove("RECONLAW_OUT")
        .env_remove("RECONLAW_JOBS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_from_data_to_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&reconlaw(&["gen-data", "--d", "12", "--n", "3", "--seed", "4", "--out", s(d)]));
    let data = Dataset::load(d.join("dataset.rlds")).unwrap();
    assert_eq!((data.n(), data.d(), data.k()), (3, 12, 1));

    let data_path = d.join("dataset.rlds");
    ok(&reconlaw(&["train", "--data", s(&data_path), "--p", "360", "--activation", "tanh", "--seed", "4", "--out", s(d)]));
    let model = SavedModel::load(d.join("model.rlrm")).unwrap();
    assert_eq!(model.feature_map().feature_dim(), 360);
    assert_eq!(model.feature_map().activation().name(), "tanh");

    let model_path = d.join("model.rlrm");
    let rec_dir = d.join("rec");
    let stdout = ok(&reconlaw(&["reconstruct", "--model", s(&model_path), "--n", "3", "--seed", "4", "--step", "2", "--out", s(&rec_dir)]));
    assert!(stdout.contains("converged = true"), "{stdout}");
    let x_hat = Dataset::load(rec_dir.join("reconstruction.rlds")).unwrap();
    assert_eq!(x_hat.x().shape(), (3, 12));
    let trace = read_trace_csv(std::fs::File::open(rec_dir.join("trace.csv")).unwrap()).unwrap();
    assert!(trace.last().unwrap().normalized_loss < 1e-7);
    let state = ReconState::load(rec_dir.join("checkpoint.rlrm")).unwrap();
    assert_eq!(state.x_hat(), x_hat.x());

    let recon_path = rec_dir.join("reconstruction.rlds");
    let json = ok(&reconlaw(&[
        "evaluate",
        "--data",
        s(&data_path),
        "--model",
        s(&model_path),
        "--reconstruction",
        s(&recon_path),
        "--out",
        s(d),
    ]));
    let report: MetricsReport = serde_json::from_str(&json).unwrap();
    assert!(report.rho < 0.05, "{report:?}");
    assert_eq!(report.sign_flips.len(), 3);
    let saved: MetricsReport = serde_json::from_str(&std::fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(saved, report);

    let ppm = d.join("img/grid.ppm");
    ok(&reconlaw(&[
        "export-images",
        "--data",
        s(&data_path),
        "--reconstruction",
        s(&recon_path),
        "--model",
        s(&model_path),
        "--out",
        s(&ppm),
        "--columns",
        "2",
    ]));
    let bytes = std::fs::read(&ppm).unwrap();
    assert!(bytes.starts_with(b"P6\n"));
}

#[test]
fn resume_continues_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&reconlaw(&["gen-data", "--d", "5", "--n", "2", "--out", s(d)]));
    ok(&reconlaw(&["train", "--data", s(&d.join("dataset.rlds")), "--p", "200", "--out", s(d)]));
    let model = d.join("model.rlrm");
    let first = d.join("first");
    ok(&reconlaw(&["reconstruct", "--model", s(&model), "--n", "2", "--max-iter", "5", "--out", s(&first)]));
    let second = d.join("second");
    ok(&reconlaw(&[
        "reconstruct",
        "--model",
        s(&model),
        "--n",
        "2",
        "--max-iter",
        "12",
        "--resume",
        s(&first.join("checkpoint.rlrm")),
        "--out",
        s(&second),
    ]));
    let a = ReconState::load(first.join("checkpoint.rlrm")).unwrap();
    let b = ReconState::load(second.join("checkpoint.rlrm")).unwrap();
    assert_eq!(a.iteration(), 5);
    assert!(b.iteration() > 5);
}

#[test]
fn sweep_writes_tables_and_honors_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"d": 6, "n": 3, "p_grid": ["4n", "4dn"], "seeds": [0, 1], "recon": {"step": 1.0, "max_iter": 3000}}"#).unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_reconlaw"))
        .args(["sweep", "--config", s(&cfg)])
        .env("RECONLAW_OUT", &out)
        .env("RECONLAW_JOBS", "2")
        .output()
        .unwrap();
    ok(&run);
    let records = read_records_csv(out.join("records.csv")).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(records.iter().map(|r| r.p).collect::<Vec<_>>(), vec![12, 12, 72, 72]);
    assert_eq!(read_aggregates_csv(out.join("aggregates.csv")).unwrap().len(), 2);
    assert!(out.join("config.json").exists());
    assert!(!out.join("failures.csv").exists());

    // an explicit flag beats the environment
    let flag_out = dir.path().join("from_flag");
    let run = Command::new(env!("CARGO_BIN_EXE_reconlaw"))
        .args(["sweep", "--config", s(&cfg), "--out", s(&flag_out), "--seed", "5", "--activation", "tanh"])
        .env("RECONLAW_OUT", &out)
        .output()
        .unwrap();
    ok(&run);
    let records = read_records_csv(flag_out.join("records.csv")).unwrap();
    assert!(records.iter().all(|r| r.seed == 5));
}

#[test]
fn hermite_reports_the_assumption_check() {
    let stdout = ok(&reconlaw(&["hermite", "--activation", "relu+tanh", "--max-order", "6"]));
    assert!(stdout.contains("mu_6"));
    assert!(stdout.contains("sign of each sample is identifiable"));
    let stdout = ok(&reconlaw(&["hermite", "--activation", "tanh"]));
    assert!(stdout.contains("warning: sign ambiguity"));
}

#[test]
fn usage_errors_exit_with_two_and_stage_errors_with_one() {
    assert_eq!(reconlaw(&["train", "--p", "10"]).status.code(), Some(2));
    assert_eq!(reconlaw(&["hermite", "--activation", "sigmoid"]).status.code(), Some(2));
    assert_eq!(reconlaw(&["no-such-command"]).status.code(), Some(2));
    let missing = reconlaw(&["train", "--data", "/nonexistent/dataset.rlds", "--p", "10"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

#[test]
fn failed_cells_are_listed_and_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    // p = 2 cannot interpolate n = 3 samples
    std::fs::write(&cfg, r#"{"d": 4, "n": 3, "p_grid": [2, "4dn"], "seeds": [0], "recon": {"step": 1.0, "max_iter": 3000}}"#).unwrap();
    let out = reconlaw(&["sweep", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let failures = std::fs::read_to_string(dir.path().join("failures.csv")).unwrap();
    let mut lines = failures.lines();
    assert_eq!(lines.next(), Some("d,n,p,seed,stage,message"));
    assert!(lines.next().unwrap().starts_with("4,3,2,0,train,"));
    assert_eq!(read_records_csv(dir.path().join("records.csv")).unwrap().len(), 1);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"d": 6, "n": 3, "p_grid": ["4dn", "n"], "seeds": [0]}"#).unwrap();
    let out = reconlaw(&["sweep", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("increasing"));
}
