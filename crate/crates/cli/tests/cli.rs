use std::process::Command;

use go_metric_lab_cli::{canonical_json, run_with, CommandConfig, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use serde_json::{json, Value};

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("go-metric-lab").chain(args.iter().copied()).map(String::from).collect()
}

fn run(args: &[&str]) -> (i32, String, String) {
    run_env(args, None)
}

fn run_env(args: &[&str], seed: Option<&str>) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(&argv(args), seed, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema_valid(report: &str) -> Value {
    let v: Value = serde_json::from_str(report).unwrap();
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    v
}

#[test]
fn spec_examples_exit_codes() {
    let (code, out, _) = run(&["verify", "--spec", "SO(7)/SO(2)xSO(3)", "--theorem", "so-normal", "--samples", "200"]);
    assert_eq!(code, EXIT_OK);
    let v = assert_schema_valid(&out);
    let passing: Vec<&str> = v["results"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["observed_pass"] == json!(true))
        .map(|e| e["label"].as_str().unwrap())
        .collect();
    assert_eq!(passing, ["normal:1"]);

    let (code, out, _) = run(&["check-go", "--spec", "U(4)/U(1)xU(2)", "--metric", "gmu:2.0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(assert_schema_valid(&out)["results"]["verdict"]["kind"], "EVIDENCE");

    let (code, out, _) = run(&["check-go", "--spec", "SO(5)/SO(3)", "--metric", r#"{"n":2,"m_{0,1}":1}"#]);
    assert_eq!(code, EXIT_FAIL);
    let v = assert_schema_valid(&out);
    let ce = &v["results"]["verdict"]["counterexample"];
    assert!(!ce["labels"].as_array().unwrap().is_empty());
    assert_eq!(v["results"]["verdict"]["kind"], "CERTIFICATE");
}

#[test]
fn every_subcommand_emits_schema_valid_json() {
    let cases: &[&[&str]] = &[
        &["decompose", "--spec", "SO(6)/SO(2)xSO(2)"],
        &["decompose", "--spec", "U(5)/U(2)xU(1)"],
        &["validate-metric", "--spec", "SO(5)/SO(3)", "--metric", "normal:2"],
        &["validate-metric", "--spec", "U(3)/U(2)", "--metric", r#"{"z(n)":3,"*":1}"#],
        &["derive-constraints", "--spec", "SO(9)/SO(2)xSO(3)"],
        &["derive-constraints", "--spec", "U(4)/U(1)xU(2)"],
        &["verify", "--spec", "U(4)/U(1)xU(2)", "--samples", "50"],
        &["check-go", "--spec", "SO(7)/SO(2)xSO(3)", "--metric", "normal:1", "--samples", "50"],
    ];
    for args in cases {
        let (code, out, err) = run(args);
        assert!(code == EXIT_OK, "{args:?}: {err}");
        assert_schema_valid(&out);
    }
}

#[test]
fn decompose_lists_v_splits() {
    let (_, out, _) = run(&["decompose", "--spec", "SO(6)/SO(2)xSO(2)"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let ids: Vec<&str> = v["results"]["fine_catalog"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"V1_{1,2}") && ids.contains(&"V2_{1,2}"));
    assert_eq!(v["results"]["normalizer_dim"], 3);
}

#[test]
fn usage_and_configuration_errors_exit_2() {
    for args in [
        &["check-go", "--spec", "SO(5)/SO(1)xSO(3)", "--metric", "normal:1"][..],
        &["check-go", "--spec", "SO(5", "--metric", "normal:1"],
        &["check-go", "--spec", "SO(5)/SO(3)"],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", "normal:-1"],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", "gmu:2"],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", "{not json"],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", r#"{"n":1}"#],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", "normal:1", "--samples", "x"],
        &["check-go", "--spec", "SO(5)/SO(3)", "--metric", "normal:1", "--tol", "-1"],
        &["verify", "--spec", "SO(5)/SO(3)", "--theorem", "u-gmu"],
        &["verify", "--spec", "SO(5)/SO(3)", "--theorem", "bogus"],
        &["frobnicate", "--spec", "SO(5)/SO(3)"],
        &["decompose"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
    let (code, _, err) = run(&["check-go", "--spec", "SO(5)/SO(1)xSO(3)", "--metric", "normal:1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("n_j>1"));
}

#[test]
fn invalid_metric_is_a_config_error_for_check_go_but_a_fail_for_validation() {
    let bad = r#"{"basis":["e_{1,2}","e_{1,3}","e_{1,4}","e_{1,5}","e_{2,3}","e_{2,4}","e_{2,5}"],
        "matrix":[1,0.5,0,0,0,0,0, 0.5,1,0,0,0,0,0, 0,0,1,0,0,0,0, 0,0,0,1,0,0,0, 0,0,0,0,1,0,0, 0,0,0,0,0,1,0, 0,0,0,0,0,0,1]}"#;
    let (code, _, err) = run(&["check-go", "--spec", "SO(5)/SO(3)", "--metric", bad]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("equivariance"));
    let (code, out, _) = run(&["validate-metric", "--spec", "SO(5)/SO(3)", "--metric", bad]);
    assert_eq!(code, EXIT_FAIL);
    let v = assert_schema_valid(&out);
    assert_eq!(v["results"]["validation"]["equivariant"], false);
    assert_eq!(v["results"]["validation"]["symmetric"], true);
}

#[test]
fn metric_file_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("metric.json");
    std::fs::write(&metric, r#"{"z(n)": 0.25, "rest": 1}"#).unwrap();
    let out = dir.path().join("report.json");
    let (code, stdout, _) = run(&[
        "check-go",
        "--spec",
        "U(4)/U(1)xU(2)",
        "--metric-file",
        metric.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--samples",
        "50",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    assert_schema_valid(&std::fs::read_to_string(&out).unwrap());

    let missing = dir.path().join("nope/report.json");
    let (code, _, err) = run(&["decompose", "--spec", "SO(5)/SO(3)", "--output", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cannot write"));

    let (code, _, _) = run(&["check-go", "--spec", "SO(5)/SO(3)", "--metric-file", "/nonexistent/m.json"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn text_format_for_failure_names_counterexample_labels() {
    let (code, out, _) =
        run(&["check-go", "--spec", "SO(5)/SO(3)", "--metric", r#"{"n":2,"m_{0,1}":1}"#, "--format", "text", "--samples", "20"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("counterexample"));
    assert!(out.contains("e_{1,2}") && out.contains("e_{1,3}"));
    assert!(out.contains("FAIL (CERTIFICATE)"));
}

#[test]
fn config_echo_round_trips() {
    let args = [
        "verify", "--spec", "U(4)/U(1)xU(2)", "--samples", "30", "--seed", "17", "--scales", "0.5,2", "--ratios", "3", "--tol", "1e-10",
    ];
    let (code, out, _) = run(&args);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let echoed: CommandConfig = serde_json::from_value(v["config"].clone()).unwrap();
    let reparsed = CommandConfig::parse(&echoed.to_argv(), None).unwrap();
    assert_eq!(echoed, reparsed);
    assert_eq!(echoed, CommandConfig::parse(&argv(&args), None).unwrap());
}

#[test]
fn env_seed_overrides_flag() {
    let args = ["check-go", "--spec", "SO(7)/SO(2)xSO(3)", "--metric", "normal:1", "--samples", "10", "--seed", "3"];
    let (_, out, _) = run_env(&args, Some("42"));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["results"]["verdict"]["seed"], 42);
    let (code, _, _) = run_env(&args, Some("minus one"));
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["check-go", "--spec", "U(4)/U(1)xU(2)", "--metric", r#"{"z(n)":2,"m_{1,2}":3,"*":1}"#, "--samples", "100"];
    let (c1, a, _) = run(&args);
    let (c2, b, _) = run(&args);
    assert_eq!((c1, c2), (EXIT_FAIL, EXIT_FAIL));
    assert_eq!(a, b);
}

#[test]
fn canonical_json_formatting() {
    let v = json!({"b": 1, "a": [0.1, 2.0, f64::NAN], "c": {"z": true, "y": null}});
    assert_eq!(
        canonical_json(&v),
        "{\n  \"a\": [\n    1.0000000000000001e-1,\n    2.0,\n    null\n  ],\n  \"b\": 1,\n  \"c\": {\n    \"y\": null,\n    \"z\": true\n  }\n}\n"
    );
    // 17 significant digits round-trip exactly.
    let x = std::f64::consts::PI / 7.0;
    let s = canonical_json(&json!(x));
    assert_eq!(s.trim().parse::<f64>().unwrap(), x);
}

#[test]
fn binary_runs_and_reports_help() {
    let bin = env!("CARGO_BIN_EXE_go-metric-lab");
    let out = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("check-go"));
    let out = Command::new(bin).args(["decompose", "--spec", "SO(5)/SO(3)", "--format", "text"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("m_{0,1}"));
    let out = Command::new(bin).args(["decompose", "--spec", "SO(1)/SO(1)"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
