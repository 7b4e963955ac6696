use std::process::{Command, Output};

fn cpwc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpwc")).args(args).env_remove("CPWC_RESULTS_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn plan_prints_case_and_sizes() {
    let o = cpwc(&["plan", "--in", "256", "--out", "64"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("case 2, 64 groups × 4 channels"));
    assert!(text.contains("r_i: 4 4 4"));
    assert_eq!(stdout(&cpwc(&["plan", "--in", "8", "--out", "8"])).lines().next(), Some("case 1, 8 singleton groups"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&cpwc(&["plan", "--in", "3", "--out", "10", "--json"]))).unwrap();
    assert_eq!(v["case"], 3);
    assert_eq!(v["share_counts"], serde_json::json!([4, 3, 3]));
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn count_builtin_with_cpwc() {
    let o = cpwc(&["count", "--builtin", "resnet164", "--cpwc", "full", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let params = v["total_params"].as_f64().unwrap();
    assert!((params - 1.96e6).abs() / 1.96e6 < 0.03, "{params}");
    let text = stdout(&cpwc(&["count", "--builtin", "resnet50", "--per-node"]));
    assert!(text.contains("s3.bottleneck0.conv1"));
    assert!(text.contains("25.56M"));
}

#[test]
fn surgery_emits_a_spec_that_counts_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/r164_cpwc.json");
    let o = cpwc(&["surgery", "--builtin", "resnet164", "--cpwc", "full", "--emit", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = stdout(&cpwc(&["count", "--spec", out.to_str().unwrap(), "--json"]));
    let b = stdout(&cpwc(&["count", "--builtin", "resnet164", "--cpwc", "full", "--json"]));
    let (a, b): (serde_json::Value, serde_json::Value) = (serde_json::from_str(&a).unwrap(), serde_json::from_str(&b).unwrap());
    assert_eq!(a["total_params"], b["total_params"]);
    assert_eq!(a["total_macs"], b["total_macs"]);
}

#[test]
fn exit_codes_by_failure_class() {
    let o = cpwc(&["count"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cpwc(&["count", "--builtin", "vgg"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cpwc(&["count", "--spec", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[io]:"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "input": {"channels": 3, "height": 8, "width": 8}, "stages": [{"block": "warp"}]}"#).unwrap();
    let o = cpwc(&["count", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr(&o).lines().count(), 1);

    let o = cpwc(&["check-grad", "--trials", "3", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[compute]:"));

    let o = cpwc(&["train", "--dataset", "cifar10", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = cpwc(&["train", "--channels", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_grad_passes() {
    let o = cpwc(&["check-grad", "--trials", "15", "--json", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["trials"].as_array().unwrap().len(), 15);
}

#[test]
fn train_writes_results_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cpwc"))
        .args(["train", "--epochs", "1", "--train-size", "64", "--val-size", "32", "--seed", "9", "--json"])
        .env("CPWC_RESULTS_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = std::fs::read_to_string(dir.path().join("train-full-seed9.json")).unwrap();
    assert_eq!(saved, stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&saved).unwrap();
    assert!(v.get("metadata").is_none());
    assert_eq!(v["epochs"].as_array().unwrap().len(), 1);
}

#[test]
fn timing_is_opt_in() {
    let o = cpwc(&["train", "--epochs", "0", "--train-size", "16", "--val-size", "16", "--json", "--timing"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["metadata"]["wall_time_secs"].is_number());
}

#[test]
fn compare_emits_ordered_table() {
    let o = cpwc(&[
        "compare", "--variants", "full,pwc-only", "--seeds", "0", "--epochs", "1", "--train-size", "64", "--val-size", "32", "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows[0]["variant"], "pwc-only");
    assert_eq!(rows[1]["variant"], "full");
}
