use std::path::Path;
use std::process::{Command, Output};

use tslab_bench::{load_dataset, DatasetManifest, LoadError};

fn bench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

/// Two short hourly series with a daily cycle and one labelled spike each.
fn corpus(dir: &Path) {
    for (k, phase) in [0.0, 1.3].iter().enumerate() {
        let mut body = String::from("timestamp,value,label\n");
        for i in 0..24 * 8 {
            let spike = i == 24 * 6 + 5 + k;
            let v = 10.0 + 3.0 * (i as f64 * std::f64::consts::TAU / 24.0 + phase).sin() + ((i * 7919 % 13) as f64 - 6.0) * 0.05;
            let v = if spike { v + 15.0 } else { v };
            body.push_str(&format!("{},{v},{}\n", 1_700_000_000 + i as i64 * 3600, u8::from(spike)));
        }
        write(dir, &format!("s{k}.csv"), &body);
    }
    write(
        dir,
        "manifest.json",
        r#"{"root": ".", "files": ["s0.csv", "s1.csv"], "timestamp_column": "timestamp",
            "value_columns": ["value"], "label_column": "label", "train_fraction": 0.5}"#,
    );
}

#[test]
fn forecast_run_writes_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    write(
        dir.path(),
        "run.json",
        r#"{"task": "forecast", "dataset": "manifest.json", "models": [{"kind": "ets"}, {"kind": "arima", "order": [1, 0, 0], "name": "ar1"}]}"#,
    );
    let out = bench(&["forecast", "--config", "run.json", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let res = dir.path().join("res");
    let mut rdr = csv::Reader::from_path(res.join("results.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let smape = header.iter().position(|h| h == "smape").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    for model in ["ets", "ar1"] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| &r[1] == model && &r[0] != "mean" && &r[0] != "median")
            .map(|r| r[smape].parse().unwrap())
            .collect();
        assert_eq!(values.len(), 2);
        let mean: f64 = rows.iter().find(|r| &r[0] == "mean" && &r[1] == model).unwrap()[smape].parse().unwrap();
        assert!((mean - values.iter().sum::<f64>() / 2.0).abs() < 1e-12);
    }

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(res.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["primary_metric"], "smape");
    assert_eq!(json["report"]["rows"].as_array().unwrap().len(), 4);

    let plots: Vec<_> = std::fs::read_dir(res.join("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(plots.len(), 4);
    let svg = std::fs::read_to_string(&plots[0]).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn anomaly_run_without_plots() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    write(
        dir.path(),
        "run.json",
        r#"{"task": "anomaly", "dataset": "manifest.json", "models": [{"kind": "zms"}]}"#,
    );
    let out = bench(&["anomaly", "--config", "run.json", "--out", "res", "--no-plots", "--threshold", "4", "--min-alerts", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    assert!(!res.join("plots").exists());
    let csv = std::fs::read_to_string(res.join("results.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("rpa_f1"));
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    write(dir.path(), "fc.json", r#"{"task": "forecast", "dataset": "manifest.json"}"#);
    write(dir.path(), "bad.json", r#"{"task": "forecast", "dataset": "manifest.json", "models": [{"kind": "nope"}]}"#);

    let missing = bench(&["forecast", "--config", "absent.json"], dir.path());
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.json"));

    let mismatch = bench(&["anomaly", "--config", "fc.json"], dir.path());
    assert!(!mismatch.status.success());

    let unknown = bench(&["forecast", "--config", "bad.json"], dir.path());
    assert!(!unknown.status.success());
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "x.csv", "timestamp,value\n0,1.0\n60,oops\n");
    let manifest: DatasetManifest = serde_json::from_str(
        r#"{"root": ".", "files": ["x.csv"], "timestamp_column": "timestamp", "value_columns": ["value"]}"#,
    )
    .unwrap();
    let err = load_dataset(&manifest, dir.path()).unwrap_err();
    assert!(matches!(err, LoadError::Parse { line: 3, .. }), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("x.csv:3") && msg.contains("oops"), "{msg}");
}

#[test]
fn iso_and_epoch_timestamps_agree() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "epoch.csv", "timestamp,value\n1709251200,1\n1709251500,2\n");
    write(dir.path(), "iso.csv", "timestamp,value\n2024-03-01 00:00:00,1\n2024-03-01 00:05:00,2\n");
    let manifest: DatasetManifest =
        serde_json::from_str(r#"{"root": ".", "files": ["epoch.csv", "iso.csv"], "timestamp_column": "timestamp"}"#).unwrap();
    let loaded = load_dataset(&manifest, dir.path()).unwrap();
    assert_eq!(loaded[0].ts.timestamps().unwrap(), loaded[1].ts.timestamps().unwrap());
}
