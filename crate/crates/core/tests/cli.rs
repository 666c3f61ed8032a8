use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ldf_das(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldf-das"))
        .args(args)
        .env_remove("LDF_DAS_OUTPUT_DIR")
        .output()
        .expect("spawn ldf-das")
}

fn ok(args: &[&str]) -> String {
    let out = ldf_das(args);
    assert!(
        out.status.success(),
        "ldf-das {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn all_zero_responses_score_normal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("das.csv");
    let labels = dir.path().join("labels.csv");
    let mut csv = String::from("patient_id");
    for i in 1..=21 {
        csv.push_str(&format!(",q{i}"));
    }
    csv.push('\n');
    for p in 0..3 {
        csv.push_str(&format!("P{p}"));
        csv.push_str(&",0".repeat(21));
        csv.push('\n');
    }
    fs::write(&input, csv).unwrap();
    let counts: serde_json::Value = serde_json::from_str(&ok(&[
        "score-das21",
        "--input",
        s(&input),
        "--out",
        s(&labels),
    ]))
    .unwrap();
    assert_eq!(counts["rows"], 3);
    assert_eq!(counts["abnormal"], 0);
    let table = fs::read_to_string(&labels).unwrap();
    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(&f[1..3], ["normal", "normal"], "{line}");
    }
}

#[test]
fn out_of_range_item_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("das.csv");
    let header: Vec<String> = (1..=21).map(|i| format!("q{i}")).collect();
    fs::write(
        &input,
        format!("patient_id,{}\nP0,4{}\n", header.join(","), ",0".repeat(20)),
    )
    .unwrap();
    let out = ldf_das(&[
        "score-das21",
        "--input",
        s(&input),
        "--out",
        s(&dir.path().join("labels.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_input_reports_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldf_das(&[
        "--output-dir",
        s(&dir.path().join("out")),
        "train",
        "--data",
        s(&dir.path().join("nope.csv")),
    ]);
    let code = out.status.code().unwrap();
    assert!(code == 3 || code == 5, "exit {code}");
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(err["error"].as_str().unwrap().ends_with("Error"));
    assert!(err["message"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn unknown_gbdt_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldf_das(&[
        "--output-dir",
        s(dir.path()),
        "train",
        "--data",
        s(&dir.path().join("x.csv")),
        "--gbdt-preset",
        "xgboost",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_give_identical_reports_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    ok(&[
        "synth",
        "--out",
        s(&cohort),
        "--patients",
        "16",
        "--seed",
        "2",
    ]);
    let table = cohort.join("participants.csv");
    let signals = cohort.join("signals");
    let out_buf = dir.path().join("out");
    let out = out_buf.as_path();
    let run = || {
        ok(&[
            "--output-dir",
            s(out),
            "train",
            "--data",
            s(&table),
            "--signals",
            s(&signals),
            "--model",
            "gbdt,random_forest",
            "--split",
            "kfold",
            "--k",
            "4",
            "--seeds",
            "2",
            "--task",
            "binary",
            "--feature-set",
            "sensor_only",
        ]);
    };
    let cells = [
        "sensor_only__kfold__binary__gbdt",
        "sensor_only__kfold__binary__random_forest",
    ];
    let files = ["report.json", "model.json"];
    let read_all = || -> Vec<Vec<u8>> {
        cells
            .iter()
            .flat_map(|c| {
                files
                    .iter()
                    .map(move |f| fs::read(out.join(c).join(f)).unwrap())
            })
            .collect()
    };
    run();
    let first = read_all();
    run();
    assert!(first == read_all(), "rerun changed report or model bytes");

    // a saved model re-scores the table through `evaluate`
    let model = out.join("sensor_only__kfold__binary__gbdt/model.json");
    let eval: serde_json::Value = serde_json::from_str(&ok(&[
        "--output-dir",
        s(&dir.path().join("eval")),
        "evaluate",
        "--model",
        s(&model),
        "--data",
        s(&table),
        "--signals",
        s(&signals),
    ]))
    .unwrap();
    assert!(eval.to_string().contains("roc_auc"), "{eval}");
}
