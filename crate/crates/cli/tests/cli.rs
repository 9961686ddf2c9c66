//! End-to-end CLI checks driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn volaflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_volaflow"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn synth_train_evaluate_pipeline() {
    let dir = tmp_dir("pipeline");
    let rv = dir.join("rv.csv");

    run_ok(volaflow()
        .args(["synth", "--stocks", "8", "--days", "160", "--warp", "softplus", "--seed", "3"])
        .arg("--out")
        .arg(&rv));
    assert!(rv.exists());
    assert!(dir.join("rv.ground_truth.json").exists());

    let run_path = dir.join("run_identity.json");
    run_ok(volaflow()
        .args([
            "train",
            "--family",
            "identity",
            "--split",
            "100,30,30",
            "--iters",
            "10",
            "--eval-every",
            "5",
            "--seed",
            "1",
        ])
        .arg("--rv")
        .arg(&rv)
        .arg("--out")
        .arg(&run_path));
    assert!(run_path.exists());

    let run_yj = dir.join("run_yj.json");
    run_ok(volaflow()
        .args([
            "train",
            "--family",
            "yeo_johnson",
            "--split",
            "100,30,30",
            "--iters",
            "10",
            "--eval-every",
            "5",
            "--seed",
            "2",
        ])
        .arg("--rv")
        .arg(&rv)
        .arg("--out")
        .arg(&run_yj));

    let report = dir.join("report");
    let stdout = run_ok(volaflow()
        .args(["evaluate", "--reference", "identity"])
        .arg("--rv")
        .arg(&rv)
        .arg("--runs")
        .arg(&run_path)
        .arg(&run_yj)
        .arg("--out")
        .arg(&report));
    assert!(stdout.contains("identity"), "{stdout}");
    assert!(report.join("report.csv").exists());
    assert!(report.join("per_stock_rmse.csv").exists());
    assert!(report.join("curve_identity.csv").exists());

    // `report` rebuilds the same artifacts from the saved runs
    let report2 = dir.join("report2");
    run_ok(volaflow()
        .args(["report", "--reference", "identity"])
        .arg("--rv")
        .arg(&rv)
        .arg("--runs")
        .arg(&run_path)
        .arg(&run_yj)
        .arg("--out")
        .arg(&report2));
    let a = std::fs::read(report.join("report.csv")).unwrap();
    let b = std::fs::read(report2.join("report.csv")).unwrap();
    assert_eq!(a, b, "report must reproduce evaluate byte-for-byte");
}

#[test]
fn rv_command_handles_both_schemas() {
    let dir = tmp_dir("rv_schemas");
    // schema B: precomputed intraday prices
    let mut csv_b = String::from("symbol,day,slot,price\n");
    for day in 1..=5u32 {
        for slot in 1..=4u32 {
            csv_b.push_str(&format!(
                "X,{day},{slot},{}\n",
                100.0 + (day + slot) as f64 * 0.1
            ));
        }
    }
    let in_b = dir.join("prices.csv");
    std::fs::write(&in_b, csv_b).unwrap();
    let out_b = dir.join("rv_b.csv");
    run_ok(volaflow()
        .args(["rv", "--schema", "b"])
        .arg("--input")
        .arg(&in_b)
        .arg("--output")
        .arg(&out_b));
    let text = std::fs::read_to_string(&out_b).unwrap();
    assert!(text.starts_with("symbol,day,rv_raw"));
    assert_eq!(text.lines().count(), 6);
    assert!(dir.join("rv_b.standardization.json").exists());

    // schema A: full quotes
    let mut csv_a = String::from("symbol,day,slot,bid_price,bid_volume,ask_price,ask_volume\n");
    for day in 1..=3u32 {
        for slot in 1..=3u32 {
            let px = 50.0 + (day * slot) as f64 * 0.01;
            csv_a.push_str(&format!("Y,{day},{slot},{},{},{},{}\n", px - 0.01, 1, px + 0.01, 2));
        }
    }
    let in_a = dir.join("quotes.csv");
    std::fs::write(&in_a, csv_a).unwrap();
    let out_a = dir.join("rv_a.csv");
    run_ok(volaflow()
        .args(["rv", "--schema", "a"])
        .arg("--input")
        .arg(&in_a)
        .arg("--output")
        .arg(&out_a));
    assert!(out_a.exists());
}

#[test]
fn missing_input_exits_2_with_single_line_error() {
    let out = volaflow()
        .args(["rv", "--input", "/nonexistent/quotes.csv", "--output", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[2]:"), "{stderr}");
}

#[test]
fn degenerate_data_exits_4() {
    let dir = tmp_dir("degenerate");
    // constant RV series cannot be standardized
    let mut csv = String::from("symbol,day,rv_raw\n");
    for day in 1..=60u32 {
        csv.push_str(&format!("C,{day},0.02\n"));
    }
    let rv = dir.join("rv.csv");
    std::fs::write(&rv, csv).unwrap();

    let out = volaflow()
        .args(["train", "--family", "identity", "--split", "30,15,15", "--iters", "5"])
        .arg("--rv")
        .arg(&rv)
        .arg("--out")
        .arg(dir.join("run.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[4]:"));
}

#[test]
fn experiment_subcommand_runs_config() {
    let dir = tmp_dir("experiment_cli");
    let rv = dir.join("rv.csv");
    run_ok(volaflow()
        .args(["synth", "--stocks", "6", "--days", "150", "--seed", "9"])
        .arg("--out")
        .arg(&rv));

    let config = serde_json::json!({
        "rv_input": "rv.csv",
        "split": {"train_len": 90, "valid_len": 30, "test_len": 30},
        "reference": "identity",
        "train": {
            "iterations": 10,
            "eval_every": 5,
            "adam": {"learning_rate": 0.01, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
            "batch": {"stocks_per_batch": 4},
            "seed": 11
        },
        "methods": [
            {"family": "identity"},
            {"family": "wallace"},
            {"family": "tanh", "k": 2}
        ]
    });
    let config_path = dir.join("experiment.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let report = dir.join("report");
    run_ok(volaflow()
        .arg("experiment")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&report));
    let table = std::fs::read_to_string(report.join("report.csv")).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
    assert!(report.join("summary.json").exists());
    assert!(report.join("run_tanh_2.json").exists());
}
