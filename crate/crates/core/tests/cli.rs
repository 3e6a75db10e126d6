//! End-to-end tests of the binary: subcommands, exit codes, file outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_consensus-lab"))
}

fn write_config(dir: &Path, name: &str, value: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn run_config(dir: &Path, output: &str) -> serde_json::Value {
    serde_json::json!({
        "algorithm": "equal-neighbor",
        "graph": {"kind": "static", "shape": "complete"},
        "n": 4,
        "mu": "indicator",
        "epsilon": 0.1,
        "max_rounds": 120,
        "seeds": [0],
        "output": dir.join(output),
    })
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn run_writes_trace_and_reports() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "run.json", run_config(dir.path(), "trace.csv"));
    let output = binary()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--check-equivalence")
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let report = stdout(&output);
    assert!(report.contains("t_eps=1"), "{report}");
    assert!(report.contains("bound=na"), "{report}");
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with(
        "round,diameter,variance_uniform,mean,min,max,d_prime_sum,learning_round\n"
    ));
    assert_eq!(csv.lines().count(), 122); // header + rounds 0..=120
}

#[test]
fn run_rejects_invalid_epsilon_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let mut config = run_config(dir.path(), "trace.csv");
    config["epsilon"] = serde_json::json!(0.0);
    let path = write_config(dir.path(), "bad.json", config);
    let output = binary().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("epsilon"), "{}", stderr(&output));
}

#[test]
fn run_flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "run.json", run_config(dir.path(), "a.csv"));
    let out_path = dir.path().join("b.csv");
    let output = binary()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--rounds", "80", "--epsilon", "0.5"])
        .arg("--output")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(!dir.path().join("a.csv").exists());
    let csv = fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 82);
    assert!(stdout(&output).contains("epsilon=0.5"));
}

#[test]
fn run_exits_3_when_horizon_cannot_certify() {
    let dir = TempDir::new().unwrap();
    let mut config = run_config(dir.path(), "trace.csv");
    config["graph"] = serde_json::json!({"kind": "static", "shape": "path"});
    config["n"] = serde_json::json!(8);
    config["epsilon"] = serde_json::json!(0.001);
    config["max_rounds"] = serde_json::json!(10);
    let path = write_config(dir.path(), "short.json", config);
    let output = binary().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(stdout(&output).contains("t_eps=not-reached"), "{}", stdout(&output));
    // The trace is still written for diagnosis.
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn run_rejects_missing_config_with_exit_2() {
    let output = binary()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn run_rejects_malformed_json_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\"algorithm\": \"flooding\"").unwrap();
    let output = binary().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_writes_report_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.csv");
    let config = write_config(
        dir.path(),
        "sweep.json",
        serde_json::json!({
            "algorithms": ["max-weight", "max-metropolis"],
            "models": [
                {"kind": "static", "shape": "cycle"},
                {"kind": "random-connected", "p": 0.5}
            ],
            "sizes": [4, 6],
            "seeds": [0, 1, 2],
            "epsilon": 0.01,
            "max_rounds": 600,
            "mu": "indicator",
            "output": report,
        }),
    );
    let output = binary().args(["sweep", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let first = fs::read(&report).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("algorithm,model,n,seed,epsilon,t_eps,bound,ratio,converged\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 3);
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[8], "true", "cell did not converge: {line}");
        let ratio: f64 = fields[7].parse().unwrap();
        assert!(ratio <= 1.0, "ratio above bound: {line}");
    }
    let rerun = binary().args(["sweep", "--config"]).arg(&config).output().unwrap();
    assert!(rerun.status.success());
    assert_eq!(first, fs::read(&report).unwrap());
}

#[test]
fn sweep_rejects_empty_algorithms_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.json",
        serde_json::json!({
            "algorithms": [],
            "models": [{"kind": "static", "shape": "path"}],
            "sizes": [4],
            "seeds": [0],
            "epsilon": 0.01,
            "max_rounds": 100,
            "mu": "indicator",
            "output": dir.path().join("report.csv"),
        }),
    );
    let output = binary().args(["sweep", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("algorithms"));
}

#[test]
fn graphgen_prints_rotating_star_rounds() {
    let dir = TempDir::new().unwrap();
    let mut config = run_config(dir.path(), "unused.csv");
    config["graph"] = serde_json::json!({"kind": "rotating-star", "period": 1});
    let path = write_config(dir.path(), "gen.json", config);
    let output = binary()
        .args(["graphgen", "--round", "2", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(output.status.success());
    // Hub is vertex 2 (1-based) in round 2.
    assert_eq!(stdout(&output), "n 4\ne 1 2\ne 2 3\ne 2 4\n");
}

#[test]
fn schedule_files_drive_runs_and_cycle() {
    let dir = TempDir::new().unwrap();
    // Two-round schedule: a 4-path, then a star on vertex 1.
    fs::write(
        dir.path().join("rounds.txt"),
        "n 4\ne 1 2\ne 2 3\ne 3 4\n\nn 4\ne 1 2\ne 1 3\ne 1 4\n",
    )
    .unwrap();
    let mut config = run_config(dir.path(), "trace.csv");
    config["graph"] = serde_json::json!({"kind": "schedule", "file": "rounds.txt"});
    config["algorithm"] = serde_json::json!("max-weight");
    let path = write_config(dir.path(), "sched.json", config);

    // Round 3 cycles back to the path block.
    let gen = binary()
        .args(["graphgen", "--round", "3", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(gen.status.success(), "{}", stderr(&gen));
    assert_eq!(stdout(&gen), "n 4\ne 1 2\ne 2 3\ne 3 4\n");

    let run = binary().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("ratio="));
}

#[test]
fn schedule_parse_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("rounds.txt"), "n 4\ne 3 2\n").unwrap();
    let mut config = run_config(dir.path(), "trace.csv");
    config["graph"] = serde_json::json!({"kind": "schedule", "file": "rounds.txt"});
    let path = write_config(dir.path(), "sched.json", config);
    let output = binary().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("line 2"), "{}", stderr(&output));
}

#[test]
fn verify_subcommand_passes_at_smoke_scale() {
    let output = binary()
        .args(["verify", "--n-max", "6", "--cases", "40", "--seed", "3"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("verify: PASS"), "{text}");
    assert!(text.contains("agent-matrix-equivalence"));
    assert!(text.contains("average-conservation"));
}

#[test]
fn verify_rejects_degenerate_arguments() {
    let output = binary()
        .args(["verify", "--n-max", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_required_flag_exits_2() {
    let output = binary().args(["run"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}
