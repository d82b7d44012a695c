use std::path::Path;
use std::process::{Command, Output};

fn mixfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfill"))
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
fn help_and_version_exit_zero() {
    let out = mixfill(&["--help"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("impute"));
    let out = mixfill(&["--version"]);
    assert!(out.status.success());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = mixfill(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn impute_requires_seed_for_stochastic_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.csv");
    for method in ["mice", "missforest"] {
        let out = mixfill(&[
            "impute",
            "--dataset",
            "iris",
            "--method",
            method,
            "--output",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
        assert!(stderr(&out).contains("--seed"));
    }
}

#[test]
fn ampute_then_knn_impute_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let holed = dir.path().join("holed.csv");
    let filled = dir.path().join("filled.csv");
    let out = mixfill(&[
        "ampute",
        "--dataset",
        "iris",
        "--fraction",
        "0.1",
        "--seed",
        "7",
        "--output",
        holed.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let holed_text = std::fs::read_to_string(&holed).unwrap();
    let expected_missing = (150.0_f64 * 5.0 * 0.1).round() as usize;
    assert_eq!(holed_text.matches("NA").count(), expected_missing);

    // the bundled schema still describes the amputed file
    let schema = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/iris.schema.json");
    let out = mixfill(&[
        "impute",
        "--input",
        holed.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--method",
        "knn",
        "--output",
        filled.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let filled_text = std::fs::read_to_string(&filled).unwrap();
    assert_eq!(filled_text.matches("NA").count(), 0);
    assert_eq!(filled_text.lines().count(), 151);
}

#[test]
fn bad_input_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    let schema = dir.path().join("s.json");
    std::fs::write(&input, "x\nnot-a-number\n").unwrap();
    std::fs::write(&schema, r#"{"columns":[{"name":"x","kind":"quantitative"}]}"#).unwrap();
    let out = mixfill(&[
        "describe",
        "--input",
        input.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not-a-number"));
}

#[test]
fn unknown_dataset_is_data_error() {
    let out = mixfill(&["describe", "--dataset", "no-such-data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no-such-data"));
}

#[test]
fn describe_matches_library_output() {
    let out = mixfill(&["describe", "--dataset", "rock"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (table, _) = mixfill::datasets::load_builtin("rock").unwrap();
    let expected = mixfill::cli::describe_json(&table);
    assert_eq!(stdout(&out).trim_end(), expected);
}

#[test]
fn impute_deterministic_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let holed = dir.path().join("holed.csv");
    mixfill(&[
        "ampute", "--dataset", "iris", "--fraction", "0.1", "--seed", "3", "--output",
        holed.to_str().unwrap(),
    ]);
    let schema = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.schema.json");
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let out = mixfill(&[
            "impute",
            "--input",
            holed.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--method",
            "missforest",
            "--ntree",
            "10",
            "--seed",
            "11",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bench_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.json");
    let report = dir.path().join("report.json");
    let raw = dir.path().join("trials.csv");
    std::fs::write(
        &config,
        r#"{
            "datasets": ["iris"],
            "fractions": [0.05],
            "methods": [{"method": "knn", "k": 5}],
            "trials": 3,
            "seed": 1,
            "measure_time": false
        }"#,
    )
    .unwrap();
    let out = mixfill(&[
        "bench",
        "--config",
        config.to_str().unwrap(),
        "--output",
        report.to_str().unwrap(),
        "--raw",
        raw.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 1);
    let raw_text = std::fs::read_to_string(&raw).unwrap();
    assert_eq!(raw_text.lines().count(), 4); // header + 3 trials
}
