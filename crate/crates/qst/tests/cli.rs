//! End-to-end checks of the `qst` binary: the file pipeline, the exit
//! code contract, and reproducibility of the outputs.

use std::path::Path;
use std::process::Command;

use qst::io;
use qst::states::error_mu;

fn qst() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qst"))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().expect("spawn qst");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_round_trip_recovers_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let shots = dir.path().join("shots.json");
    let est = dir.path().join("est.json");

    run_ok(qst()
        .args(["gen-state", "--qubits", "3", "--seed", "7"])
        .arg("--out")
        .arg(&state));
    run_ok(qst()
        .args(["measure", "--setup", "tall", "--shots", "1000000", "--seed", "3"])
        .arg("--state")
        .arg(&state)
        .arg("--out")
        .arg(&shots));
    run_ok(qst()
        .args(["reconstruct", "--method", "recursive", "--ml", "mixed"])
        .arg("--shots")
        .arg(&shots)
        .arg("--out")
        .arg(&est));

    let truth = io::read_state(&state).unwrap();
    let estimate = io::read_state(&est).unwrap();
    let mu = error_mu(&truth, &estimate).unwrap().mu;
    assert!(mu < 0.02, "end-to-end mu {mu}");

    // Diagnostics land next to the estimate by default.
    let diag = dir.path().join("est.diag.json");
    assert!(diag.exists());
    let text = std::fs::read_to_string(diag).unwrap();
    assert!(text.contains("\"method\": \"recursive\""));
}

#[test]
fn recursive_on_small_setup_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let shots = dir.path().join("shots.json");
    run_ok(qst()
        .args(["gen-state", "--qubits", "2", "--seed", "1"])
        .arg("--out")
        .arg(&state));
    run_ok(qst()
        .args(["measure", "--setup", "small", "--shots", "4000"])
        .arg("--state")
        .arg(&state)
        .arg("--out")
        .arg(&shots));
    let out = qst()
        .args(["reconstruct", "--method", "recursive"])
        .arg("--shots")
        .arg(&shots)
        .arg("--out")
        .arg(dir.path().join("est.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_with_code_one() {
    let out = qst().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_state_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        run_ok(qst()
            .args(["gen-state", "--qubits", "4", "--seed", "99"])
            .arg("--out")
            .arg(path));
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same seed must give identical files"
    );
}

#[test]
fn ml_none_returns_the_raw_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let shots = dir.path().join("shots.json");
    let est = dir.path().join("est.json");
    run_ok(qst()
        .args(["gen-state", "--qubits", "2", "--seed", "5"])
        .arg("--out")
        .arg(&state));
    run_ok(qst()
        .args(["measure", "--setup", "tall", "--shots", "100000", "--seed", "6"])
        .arg("--state")
        .arg(&state)
        .arg("--out")
        .arg(&shots));
    run_ok(qst()
        .args(["reconstruct", "--method", "recursive", "--ml", "none"])
        .arg("--shots")
        .arg(&shots)
        .arg("--out")
        .arg(&est));
    let text = std::fs::read_to_string(dir.path().join("est.diag.json")).unwrap();
    assert!(text.contains("\"ml\": null"));
}

#[test]
fn empty_experiment_writes_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(qst()
        .args([
            "experiment",
            "--qubits",
            "2",
            "--setup",
            "tall",
            "--shots",
            "1000",
            "--trials",
            "0",
            "--seed",
            "3",
        ])
        .arg("--out-dir")
        .arg(dir.path()));
    let rows = io::read_trial_csv(&dir.path().join("results.csv")).unwrap();
    assert!(rows.is_empty());
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(text.starts_with("# config:"));
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("aggregates.json")).unwrap())
            .unwrap();
    assert_eq!(agg["master_seed"], 3);
}

#[test]
fn experiment_rows_are_reproducible_outside_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(qst()
            .args([
                "experiment",
                "--qubits",
                "2",
                "--setup",
                "tall",
                "--shots",
                "2000",
                "--trials",
                "4",
                "--ml",
                "mixed",
                "--seed",
                "17",
            ])
            .arg("--out-dir")
            .arg(out));
    }
    let strip = |p: &Path| -> Vec<String> {
        io::read_trial_csv(&p.join("results.csv"))
            .unwrap()
            .into_iter()
            .map(|r| {
                format!(
                    "{} {} {} {} {} {}",
                    r.trial, r.seed, r.stage, r.mu, r.converged, r.failure_flag
                )
            })
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn experiment_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{ "n_qb": 2, "setup": "tall", "total_shots": 2000, "trials": 3, "master_seed": 5 }"#,
    )
    .unwrap();
    // The flag overrides the file's trial count.
    run_ok(qst()
        .args(["experiment", "--trials", "2"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    let rows = io::read_trial_csv(&dir.path().join("results.csv")).unwrap();
    let max_trial = rows.iter().map(|r| r.trial).max().unwrap();
    assert_eq!(max_trial, 1, "flag must override the config file");
}

#[test]
fn divergence_mode_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(qst()
        .args([
            "experiment",
            "--divergence",
            "--qubits",
            "2",
            "--setup",
            "small",
            "--shots",
            "2000",
            "--inits",
            "8",
            "--ml",
            "mixed",
            "--seed",
            "23",
        ])
        .arg("--out-dir")
        .arg(dir.path())
        .arg("--emit-plot-script"));
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("divergence.json")).unwrap(),
    )
    .unwrap();
    let curves = doc["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 1);
    assert_eq!(curves[0]["objective"], "mixed");
    assert_eq!(curves[0]["b"].as_array().unwrap().len(), 8);
    assert!(dir.path().join("divergence.csv").exists());
    assert!(dir.path().join("plot_results.py").exists());
}

#[test]
fn measure_accepts_custom_setup_files() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let setup = dir.path().join("setup.json");
    let shots = dir.path().join("shots.json");
    run_ok(qst()
        .args(["gen-state", "--qubits", "2", "--seed", "8"])
        .arg("--out")
        .arg(&state));
    std::fs::write(
        &setup,
        r#"{ "kind": "custom", "n_qb": 2, "types": ["ZZ", "XY", "YX"] }"#,
    )
    .unwrap();
    run_ok(qst()
        .args(["measure", "--shots", "3000"])
        .arg("--state")
        .arg(&state)
        .arg("--setup")
        .arg(&setup)
        .arg("--out")
        .arg(&shots));
    let rec = io::read_shots(&shots).unwrap();
    assert_eq!(rec.setup().n_types(), 3);
    assert_eq!(rec.shots_per_type(), 1000);
}
