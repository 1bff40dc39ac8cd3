//! End-to-end checks of the binary: exit codes, file shapes, and
//! byte-level reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momentlyap"))
}

fn workspace_root() -> PathBuf {
    // crates/cli -> workspace root.
    Path::new(env!("CARGO_MANIFEST_DIR")).parent().unwrap().parent().unwrap().to_path_buf()
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("momentlyap-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\":\"usage\""), "stderr: {err}");
    assert!(err.contains("usage: momentlyap"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["phase", "--n", "5", "--noise", "UH", "--grid", "9", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_json() {
    let dir = tmp_dir("badcfg");
    let path = dir.join("bad.json");
    // Fit window past t_max.
    fs::write(
        &path,
        r#"{"system":{"a":[[0.9]],"noise":{"kind":"UH","b2":0.01},"x0":[1.0]},
           "run":{"t_max":10,"runs":100,"seed":1,"fit_window":[2,20]}}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\":\"config\""), "stderr: {err}");
    assert!(err.contains("fit window"), "stderr: {err}");
}

#[test]
fn numerical_errors_exit_3() {
    let dir = tmp_dir("numerr");
    let path = dir.join("tied.json");
    // Identity matrix: dominant eigenvalue is not simple.
    fs::write(
        &path,
        r#"{"system":{"a":[[1.0,0.0],[0.0,1.0]],"noise":{"kind":"UH","b2":0.01},"x0":[1.0,1.0]},
           "run":{"t_max":10,"runs":100,"seed":1,"fit_window":[2,10]}}"#,
    )
    .unwrap();
    let out = run(&["critical", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\":\"numerical\""), "stderr: {err}");
}

#[test]
fn classify_three_cycle() {
    let matrix = workspace_root().join("configs/perm3.csv");
    let out = run(&["classify", "--matrix", matrix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["data"]["kind"], "IrreducibleImprimitive");
    assert_eq!(doc["data"]["h"], 3);
}

#[test]
fn phase_diagram_shape() {
    let dir = tmp_dir("phase");
    let out = run(&["phase", "--n", "5", "--noise", "UH", "--grid", "99", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("phase.csv")).unwrap();
    assert!(csv.starts_with("# tool: momentlyap"));
    assert!(csv.contains("# config_hash:"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "lambda,bc2,qc");
    assert_eq!(rows.len(), 100);
    // Monotone decreasing critical value across the grid.
    let bc2: Vec<f64> = rows[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for w in bc2.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn scalar_outputs_exact_moments() {
    let dir = tmp_dir("scalar");
    let out = run(&[
        "scalar", "--a", "0.97", "--b2", "0.05", "--p", "2", "--t-max", "10", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("scalar_moments.csv")).unwrap();
    let row: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && l.starts_with("10,2,"))
        .collect();
    let v: f64 = row[0].split(',').nth(2).unwrap().parse().unwrap();
    let expected = (0.97f64 * 0.97 + 0.05).powi(10);
    assert!((v - expected).abs() < 1e-12 * expected);
    let json_text = fs::read_to_string(dir.join("scalar.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    let l2 = doc["data"]["l2_exact"].as_f64().unwrap();
    assert!((l2 - (0.97f64 * 0.97 + 0.05).ln()).abs() < 1e-14);
}

#[test]
fn report_on_committed_fixture_is_reproducible_across_threads() {
    let cfg = workspace_root().join("configs/exa_uh.json");
    let dir1 = tmp_dir("rep1");
    let dir2 = tmp_dir("rep2");
    // Small override run: the committed config's runs would be slow here.
    let small = dir1.join("cfg.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    doc["run"]["runs"] = serde_json::json!(500);
    doc["run"]["t_max"] = serde_json::json!(15);
    doc["run"]["fit_window"] = serde_json::json!([3, 15]);
    doc["output"]["directory"] = serde_json::Value::Null;
    fs::write(&small, serde_json::to_string(&doc).unwrap()).unwrap();

    let out1 = run(&[
        "report", "--config", small.to_str().unwrap(), "--out", dir1.to_str().unwrap(),
        "--threads", "1",
    ]);
    assert_eq!(out1.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out1.stderr));
    let out2 = run(&[
        "report", "--config", small.to_str().unwrap(), "--out", dir2.to_str().unwrap(),
        "--threads", "2",
    ]);
    assert_eq!(out2.status.code(), Some(0));

    // Same config + seed -> byte-identical artifacts, thread count must
    // not matter.
    let r1 = fs::read(dir1.join("report.json")).unwrap();
    let r2 = fs::read(dir2.join("report.json")).unwrap();
    assert_eq!(r1, r2);
    let s1 = fs::read(dir1.join("series.csv")).unwrap();
    let s2 = fs::read(dir2.join("series.csv")).unwrap();
    assert_eq!(s1, s2);

    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&r1)).unwrap();
    for key in ["l2_mc", "l2_exact", "l2_perturbation", "l2_iteration", "critical"] {
        assert!(!doc["data"][key].is_null(), "missing {key}");
    }
    assert!(doc["meta"]["config_hash"].is_string());
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tmp_dir("seedover");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"system":{"a":[[0.9]],"noise":{"kind":"UH","b2":0.02},"x0":[1.0]},
           "run":{"t_max":10,"runs":300,"seed":1,"fit_window":[2,10]}}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let base = fs::read_to_string(dir.join("series.csv")).unwrap();
    let out = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(),
        "--seed", "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let other = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert_ne!(base, other);
}

#[test]
fn ensemble_scatter_csv() {
    let dir = tmp_dir("ens");
    let spec = dir.join("ens.json");
    fs::write(
        &spec,
        r#"{"n":4,"generator":{"kind":"uniform_smallvar","mean":0.2,"sd":0.02},
           "normalize_lambda":1.0,"count":50}"#,
    )
    .unwrap();
    let out = run(&[
        "ensemble", "--spec", spec.to_str().unwrap(), "--seed", "9", "--metrics", "gap,kappa",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("scatter.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "draw_index,gap,kappa,accepted_attempts");
    assert_eq!(rows.len(), 51);
}

#[test]
fn iterate_reports_orders_and_exact() {
    let cfg = workspace_root().join("configs/crazya_uh.json");
    let dir = tmp_dir("iter");
    let out = run(&["iterate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("iteration.json")).unwrap()).unwrap();
    assert_eq!(doc["data"]["iteration"].as_array().unwrap().len(), 6);
    let exact = doc["data"]["l2_exact"].as_f64().unwrap();
    assert!((exact - 0.8325).abs() < 0.01, "exact = {exact}");
}
