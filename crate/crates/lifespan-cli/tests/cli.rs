use std::path::Path;
use std::process::{Command, Output};

fn lifespan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifespan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn exponents_succeeds_and_emits_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let run = lifespan(&["exponents", "--n", "3", "--q", "2", "--out", out_dir]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    let text = stdout(&run);
    assert!(text.contains("Strauss"), "report: {text}");
    assert!(text.contains("wrote "), "report: {text}");

    let csv_path = dir.path().join("exponents.csv");
    let first = std::fs::read(&csv_path).unwrap();
    let rerun = lifespan(&["exponents", "--n", "3", "--q", "2", "--out", out_dir]);
    assert!(rerun.status.success());
    let second = std::fs::read(&csv_path).unwrap();
    assert_eq!(first, second, "rerun changed emitted bytes");

    // q = 2 sits exactly on the shifted Fujita threshold q_F(n+α) = 2, so
    // the Strauss row is the only prediction.
    let jsonl = std::fs::read_to_string(dir.path().join("exponents.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1, "predictions: {jsonl}");
    assert!(jsonl.contains("\"dominant\":true"), "single row must dominate: {jsonl}");
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    // q = 2.6 sits above both the Strauss and Fujita thresholds for n = 3,
    // so only the marker row remains.
    let run = lifespan(&["exponents", "--q", "2.6", "--out", out_dir]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    let csv = std::fs::read_to_string(dir.path().join("exponents.csv")).unwrap();
    assert!(csv.contains("NoPrediction"), "csv: {csv}");
    assert!(!csv.contains("Strauss"), "csv: {csv}");
}

#[test]
fn malformed_config_exits_one_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    // c1 > 0 without the power p: validation must name problem.p.
    std::fs::write(&path, "[problem]\nc1 = 1.0\n").unwrap();
    let run = lifespan(&["exponents", "--config", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1), "stderr: {}", stderr(&run));
    assert!(stderr(&run).contains("problem.p"), "stderr: {}", stderr(&run));

    let path = dir.path().join("syntax.toml");
    std::fs::write(&path, "[problem\nn = 3\n").unwrap();
    let run = lifespan(&["exponents", "--config", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));

    let path = dir.path().join("unknown.toml");
    std::fs::write(&path, "[problem]\nnn = 3\n").unwrap();
    let run = lifespan(&["exponents", "--config", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1), "unknown fields must be rejected");
}

#[test]
fn geometry_check_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = lifespan(&[
        "geometry",
        "check",
        "--profile",
        "long-range",
        "--kappa",
        "0.5",
        "--delta0",
        "0.999",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2), "stderr: {}", stderr(&run));
    assert!(stderr(&run).contains("check failed"), "stderr: {}", stderr(&run));
}

#[test]
fn geometry_check_passes_on_benign_profile() {
    let dir = tempfile::tempdir().unwrap();
    let run = lifespan(&[
        "geometry",
        "check",
        "--profile",
        "long-range",
        "--kappa",
        "0.1",
        "--decay-rho",
        "1.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    assert!(stdout(&run).contains("decay constants"));
    assert!(dir.path().join("metric_profile.dat").exists());
}

#[test]
fn print_config_round_trips_and_honors_flags() {
    let run = lifespan(&["print-config"]);
    assert!(run.status.success());
    let text = stdout(&run);
    let config = lifespan_core::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(config, lifespan_core::ExperimentConfig::default());

    let run = lifespan(&["print-config", "--mu1", "2", "--q", "1.5"]);
    let config = lifespan_core::ExperimentConfig::from_toml_str(&stdout(&run)).unwrap();
    assert_eq!(config.problem.mu1, 2.0);
    assert_eq!(config.problem.q, Some(1.5));
}

#[test]
fn config_file_plus_flag_override_chain() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("base.toml");
    std::fs::write(&path, "[problem]\nn = 2\nq = 2.0\n").unwrap();
    let run = lifespan(&[
        "print-config",
        "--config",
        path.to_str().unwrap(),
        "--q",
        "3.0",
    ]);
    assert!(run.status.success());
    let config = lifespan_core::ExperimentConfig::from_toml_str(&stdout(&run)).unwrap();
    assert_eq!(config.problem.n, 2, "config file field lost");
    assert_eq!(config.problem.q, Some(3.0), "flag did not win over config");
}

#[test]
fn kato_sweep_runs_quickly_and_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let run = lifespan(&[
        "kato",
        "--count",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    assert!(stdout(&run).contains("fitted exponent"));
    let csv = std::fs::read_to_string(dir.path().join("kato_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "header + 4 ladder rows: {csv}");
}

#[test]
fn eigenfunction_certificate_on_flat_metric() {
    let dir = tempfile::tempdir().unwrap();
    let run = lifespan(&[
        "eigenfunction",
        "--lambdas",
        "0.3,0.5",
        "--r-max",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    assert!(stdout(&run).contains("holds = true"), "report: {}", stdout(&run));
    assert!(dir.path().join("eigenfunction.csv").exists());
    assert!(
        !dir.path().join("eigenfunction_lambda_0.300.dat").exists(),
        "dat emission must respect --format csv"
    );
}

#[test]
fn simulate_emits_history_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = lifespan(&[
        "simulate",
        "--epsilon",
        "0.1",
        "--t-cap",
        "2",
        "--dr",
        "0.05",
        "--sample-dt",
        "0.5",
        "--snapshots",
        "0,1,2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    for name in ["run_history.csv", "sup_norm.dat", "snapshots.dat"] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let dat = std::fs::read_to_string(dir.path().join("snapshots.dat")).unwrap();
    let header: Vec<&str> = dat.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(header.len(), 1 + 4, "# marker, r, and three snapshot columns: {header:?}");
}

#[test]
fn help_documents_output_schemas() {
    let run = lifespan(&["lifespan-sweep", "--help"]);
    assert!(run.status.success());
    let text = stdout(&run);
    assert!(text.contains("lifespan_sweep.csv"), "help: {text}");
    assert!(text.contains("epsilon, t_num, threshold, dr, flags"), "help: {text}");

    let run = lifespan(&["--help"]);
    assert!(stdout(&run).contains("Exit codes"));
}

#[test]
fn output_directory_is_created_if_missing() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("a").join("b");
    let run = lifespan(&["exponents", "--out", nested.to_str().unwrap()]);
    assert!(run.status.success(), "stderr: {}", stderr(&run));
    assert!(nested.join("exponents.csv").exists());
}

#[test]
fn nonexistent_config_exits_one() {
    let missing = Path::new("/nonexistent/config.toml");
    let run = lifespan(&["exponents", "--config", missing.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
}
