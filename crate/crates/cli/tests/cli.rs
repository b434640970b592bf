//! End-to-end checks of the binary: exit codes, artifacts, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_widthlab"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn estimate_width_oracle_and_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "problem": {
                "N": 4, "blocks": [[1,2,3,4]], "weights": [1,1,1,1],
                "norm": {"components": [{"q": 2, "weights": "shared"}]}
            },
            "n": 2, "method": "brute_force", "brute_force_starts": 200, "timings": false
        }"#,
    );
    let out = bin()
        .args(["estimate-width", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("width_estimate.json")).unwrap())
            .unwrap();
    let target = 2.0_f64.sqrt() / 2.0;
    let lower = est["lower"].as_f64().unwrap();
    let upper = est["upper"].as_f64().unwrap();
    assert!((lower - target).abs() < 1e-9);
    assert!((upper - target).abs() < 0.01 * target);

    // n ≥ N → width 0
    let cfg0 = dir.path().join("cfg0.json");
    write(
        &cfg0,
        r#"{
            "problem": {
                "N": 3, "blocks": [[1,2,3]], "weights": [1,1,1],
                "norm": {"components": [{"q": 2, "weights": "shared"}]}
            },
            "n": 3, "timings": false
        }"#,
    );
    let out = bin()
        .args(["estimate-width", "--config"])
        .arg(&cfg0)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("width_estimate.json")).unwrap())
            .unwrap();
    assert_eq!(est["upper"].as_f64().unwrap(), 0.0);

    // malformed JSON → exit 1
    let bad = dir.path().join("bad.json");
    write(&bad, "{ not json");
    let out = bin()
        .args(["estimate-width", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_theorem2_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // condition 1 violated → exit 3, report still written
    let cfg = dir.path().join("bad_cond.json");
    write(
        &cfg,
        r#"{"n_dim": 8, "weights": [8,1,1,1,1,1,1,1], "blocks": {"equal": 1},
            "n": 2, "q": 4.0, "trials": 200, "timings": false}"#,
    );
    let out = bin()
        .args(["verify-theorem2", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("theorem2_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["conditions"]["condition1"]["pass"], false);

    // trials = 0 → exit 1
    let cfg = dir.path().join("zero.json");
    write(
        &cfg,
        r#"{"n_dim": 64, "weights": "uniform", "blocks": {"equal": 1},
            "n": 4, "q": 4.0, "trials": 0, "timings": false}"#,
    );
    let out = bin()
        .args(["verify-theorem2", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scaling_sweep_two_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    write(
        &cfg,
        r#"{"thetas": ["1"], "q": 4.0, "ns": [6, 10], "m_rule": {"fixed": 3},
            "timings": false, "effort": {"samples": 32, "ascent_steps": 4}}"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let st = bin()
            .args(["scaling-sweep", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let csv_a = std::fs::read(out_a.join("sweep.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "same seed must give byte-identical CSV");
    let text = String::from_utf8(csv_a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let lower: f64 = cells[4].parse().unwrap();
        let upper: f64 = cells[5].parse().unwrap();
        assert!(lower <= upper + 1e-9);
    }
    let summary_a = std::fs::read(out_a.join("sweep_summary.json")).unwrap();
    let summary_b = std::fs::read(out_b.join("sweep_summary.json")).unwrap();
    assert_eq!(summary_a, summary_b);
}

#[test]
fn besov_check_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bc.json");
    write(&cfg, r#"{"levels": 4, "p": 4.0, "vectors": 5, "timings": false}"#);
    let out = bin()
        .args(["besov-check", "--config"])
        .arg(&cfg)
        .args(["--seed", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("besov_report.json")).unwrap())
            .unwrap();
    assert!(report["gram_identity_error"].as_f64().unwrap() < 1e-3);
    assert!(report["roundtrip_error"].as_f64().unwrap() < 1e-4);
    // coefficient artifact follows the {m, levels} schema
    let coeff: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("besov_coefficients.json")).unwrap())
            .unwrap();
    assert_eq!(coeff["m"].as_u64().unwrap(), 4);
    assert_eq!(coeff["levels"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(dir.path().join("besov_sample.csv")).unwrap();
    assert!(csv.starts_with("t,f\n"));
}

#[test]
fn kashin_table_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("kt.json");
    write(
        &cfg,
        r#"{"n_dim": 16, "q": 4.0, "ns": [4],
            "search": {"random_restarts": 2, "refine_iters": 10}, "timings": false}"#,
    );
    let out = bin()
        .args(["kashin-table", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("kashin_table.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let lower: f64 = row[1].parse().unwrap();
    let upper: f64 = row[2].parse().unwrap();
    assert!((lower - 0.25).abs() < 1e-12);
    assert!(lower <= upper);
}
