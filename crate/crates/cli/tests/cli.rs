use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vargame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vargame"))
        .args(args)
        .env_remove("VARGAME_PROFILE_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn probabilities(run: &Value, customer: usize) -> Vec<f64> {
    run["result"]["profile"][customer]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[test]
fn validate_accepts_bundled_and_rejects_unsorted_actions() {
    let ok = vargame(&["validate", "two_customer"]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("2 customers, 4 joint profiles"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"customers":[{"id":"a","p":1,"phi_init":0.7,"phi_std":0.85,"tau":0.5,"actions":[0.9,0.8]}]}"#,
    )
    .unwrap();
    let out = vargame(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

#[test]
fn malformed_json_is_a_validation_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    fs::write(&bad, "{\"customers\": [").unwrap();
    let out = vargame(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn solve_writes_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = vargame(&[
        "solve",
        "two_customer",
        "--mode",
        "both",
        "--trace",
        "--seedless",
        "--out",
        d,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["seedless"], Value::Bool(true));
    assert_eq!(summary["regime"]["regime"], "two_by_two_straddle");
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["result"]["mode"], "eut");
    assert_eq!(runs[1]["result"]["mode"], "pt");
    let eut = probabilities(&runs[0], 0);
    assert!((eut[0] - 0.4246).abs() < 0.02, "{eut:?}");
    assert!(runs.iter().all(|r| r["is_epsilon_ne"] == Value::Bool(true)));

    for mode in ["eut", "pt"] {
        let trace = fs::read_to_string(dir.path().join(format!("trace_{mode}.csv"))).unwrap();
        let mut lines = trace.lines();
        assert_eq!(lines.next(), Some("m,customer,action_index,action_pf,frequencies"));
        assert!(lines.next().unwrap().starts_with("1,c1,"));
    }
}

#[test]
fn summary_scenario_echo_reruns_to_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let run = |out: &Path, scenario: &str| {
        let o = vargame(&["solve", scenario, "--tau", "0.6", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_json(&out.join("summary.json"))
    };
    let a = run(&first, "three_customer");
    let echo = dir.path().join("echo.json");
    fs::write(&echo, serde_json::to_string(&a["scenario"]).unwrap()).unwrap();
    let b = run(&second, echo.to_str().unwrap());
    assert_eq!(a["runs"], b["runs"]);
    assert_eq!(a["scenario"], b["scenario"]);
}

#[test]
fn seven_customers_at_low_penalty_all_pick_the_highest_factor() {
    let out = vargame(&["solve", "seven_customer", "--tau", "0.5"]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for run in summary["runs"].as_array().unwrap() {
        for i in 0..7 {
            assert!(probabilities(run, i)[2] > 0.99);
        }
    }
}

#[test]
fn strict_mode_flags_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    let mut s: Value = serde_json::from_str(&fs::read_to_string(bundled("two_customer.json")).unwrap()).unwrap();
    s["fp"]["max_iters"] = Value::from(5);
    fs::write(&path, s.to_string()).unwrap();
    let p = path.to_str().unwrap();

    assert_eq!(vargame(&["solve", p]).status.code(), Some(0));
    let strict = vargame(&["solve", p, "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
    let summary: Value = serde_json::from_str(&stdout(&strict)).unwrap();
    assert_eq!(summary["runs"][0]["result"]["converged"], Value::Bool(false));
    assert_eq!(summary["runs"][0]["result"]["iterations"], 5);
}

fn bundled(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(name)
}

#[test]
fn profile_cap_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_vargame"))
        .args(["solve", "three_customer"])
        .env("VARGAME_PROFILE_CAP", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("216 profiles"));
}

#[test]
fn sweep_csv_is_deterministic() {
    let args = [
        "sweep",
        "two_customer",
        "--param",
        "beta",
        "--grid",
        "0.1:1.0:0.3",
        "--alpha",
        "1",
        "--k",
        "1",
        "--reference",
        "zero",
    ];
    let a = vargame(&args);
    let b = vargame(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("param,value,mode,customer,expected_utility,probabilities,converged,iterations,ne_gap,error")
    );
    // 4 grid points x 2 modes x (2 customers + total + average)
    assert_eq!(lines.count(), 32);
}

#[test]
fn sweep_rejects_bad_grids() {
    let out = vargame(&["sweep", "two_customer", "--param", "beta", "--grid", "0.5,0.4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = vargame(&["sweep", "two_customer", "--param", "gamma", "--grid", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn threshold_on_three_customers() {
    let dir = tempfile::tempdir().unwrap();
    let out = vargame(&[
        "threshold",
        "three_customer",
        "--k-min",
        "0.5",
        "--k-max",
        "2.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("threshold.json"));
    let k0 = summary["threshold"]["k0"].as_f64().unwrap();
    assert!((k0 - 1.04).abs() <= 0.1, "{k0}");
    assert_eq!(summary["threshold"]["scope"], "total");
}

#[test]
fn threshold_without_sign_change_fails() {
    let out = vargame(&[
        "threshold",
        "two_customer",
        "--reference=-10",
        "--k-min",
        "0.5",
        "--k-max",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sign change"));
}

#[test]
fn oracle_reports_mixed_equilibrium_only() {
    let out = vargame(&["oracle", "two_customer", "--mode", "eut"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let report = &v["reports"][0];
    assert_eq!(report["pure"].as_array().unwrap().len(), 0);
    let x = report["mixed_2x2"][0][0].as_f64().unwrap();
    assert!((x - 0.42455703292080244).abs() < 1e-12);
}

#[test]
fn reproduce_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = vargame(&["reproduce", "corollaries", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let checks = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(checks.starts_with("check,passed,detail\n"));
    assert_eq!(checks.lines().skip(1).filter(|l| l.contains(",true,")).count(), 8);
    assert!(dir.path().join("corollaries.csv").exists());

    let unknown = vargame(&["reproduce", "fig9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(1));
}
