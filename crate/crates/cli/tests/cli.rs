use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funnelkit"))
        .args(args)
        .env_remove("FUNNELKIT_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn emit_parity(dir: &TempDir) -> PathBuf {
    let mech = dir.path().join("mechanism.json");
    let out = run(&[
        "solve",
        s(&model("parity.json")),
        "--emit-mechanism",
        s(&mech),
    ]);
    assert_eq!(out.status.code(), Some(0));
    mech
}

#[test]
fn analyze_reports_thresholds_and_feasibility() {
    let out = run(&["analyze", s(&model("parity.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["components"][0]["tau_bits"], 1.0);
    assert_eq!(v["tasks"][1]["feasible"], true);
    assert_eq!(v["tasks"][1]["leakage_free"], false);
    assert_eq!(v["joint_alphabet_size"], 16);
}

#[test]
fn solve_prints_the_allocation() {
    let out = run(&["solve", s(&model("parity.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["total_leakage_bits"], 0.5);
    assert_eq!(v["alphas"], serde_json::json!([1.5, 1.0]));
    assert_eq!(v["status"]["status"], "optimal");
}

#[test]
fn infeasible_override_exits_three() {
    let out = run(&["solve", s(&model("parity.json")), "--gamma", "1=4.5"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["total_leakage_bits"], "inf");
    assert_eq!(v["status"]["violated_tasks"], serde_json::json!([1]));
}

#[test]
fn bad_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(
        &broken,
        r#"{"components": [{"alphabet": ["a"], "pmf": [0.4], "private_map": [0]}], "tasks": []}"#,
    )
    .unwrap();
    assert_eq!(run(&["analyze", s(&broken)]).status.code(), Some(2));
    assert_eq!(
        run(&["analyze", s(&dir.path().join("missing.json"))])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["solve", s(&model("parity.json")), "--gamma", "7=1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["verify", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn eval_reproduces_the_emitted_mechanism() {
    let dir = TempDir::new().unwrap();
    let mech = emit_parity(&dir);
    let out = run(&["eval", s(&model("parity.json")), s(&mech)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["leakage_bits"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(v["all_satisfied"], true);
    // the identity branch of the mixture releases S exactly for some outputs
    assert_eq!(v["dp_epsilon_nats"], "inf");
}

#[test]
fn sweep_writes_one_row_per_scale() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        s(&model("parity.json")),
        "--scales",
        "0.5:1.5:0.25",
        "--out",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"], 5);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scale,L_star_bits,feasible,slack_0,slack_1");
    assert_eq!(lines[3], "1,0.5,true,0,0");
    assert_eq!(lines[5], "1.5,inf,false,,");
}

#[test]
fn parallelize_emits_component_channels() {
    let dir = TempDir::new().unwrap();
    let mech = emit_parity(&dir);
    let chans = dir.path().join("parallel.json");
    let parity = model("parity.json");
    for extra in [&[][..], &["--compression"][..]] {
        let mut args = vec![
            "parallelize",
            s(&parity),
            s(&mech),
            "--emit-channel",
            s(&chans),
        ];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_eq!(json(&out)["product_form_ok"], true);
    }
    // the emitted per-component channels evaluate like any other mechanism
    let out = run(&["eval", s(&model("parity.json")), s(&chans)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["utility_bits"][1].as_f64().unwrap() >= 2.5 - 1e-9);
}

#[test]
fn dp_eps_of_randomized_response_is_ln3() {
    let dir = TempDir::new().unwrap();
    let rr = dir.path().join("rr.json");
    std::fs::write(
        &rr,
        r#"{"in": ["0", "1"], "out": ["0", "1"], "rows": [[0.75, 0.25], [0.25, 0.75]]}"#,
    )
    .unwrap();
    let m = dir.path().join("model.json");
    std::fs::write(
        &m,
        r#"{"components": [{"alphabet": ["0", "1"], "pmf": [0.5, 0.5], "private_map": [0, 1], "private_alphabet": ["a", "b"]}],
            "tasks": [{"components": [0], "gamma_bits": 0.1}]}"#,
    )
    .unwrap();
    let out = run(&["dp-eps", s(&m), s(&rr)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["epsilon_nats"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-9);
    assert_eq!(v["units"], "nats");
}

#[test]
fn verify_with_one_trial_passes() {
    let out = run(&["verify", "--seed", "7", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_funnelkit"))
        .args(["verify", "--trials", "1"])
        .env("FUNNELKIT_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(json(&out)["config"]["seed"], 11);
}

#[test]
fn corrupted_mechanism_fails_verification() {
    let dir = TempDir::new().unwrap();
    let mech = emit_parity(&dir);
    let mut bundle: Value = serde_json::from_str(&std::fs::read_to_string(&mech).unwrap()).unwrap();
    bundle["metrics"]["leakage_bits"] = serde_json::json!(0.25);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, bundle.to_string()).unwrap();

    let good = run(&[
        "verify",
        "--trials",
        "1",
        "--mechanism",
        s(&model("parity.json")),
        s(&mech),
    ]);
    assert_eq!(good.status.code(), Some(0));
    let out = run(&[
        "verify",
        "--trials",
        "1",
        "--mechanism",
        s(&model("parity.json")),
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}
