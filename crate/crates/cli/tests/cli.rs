use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sparseloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparseloc")).args(args).output().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparseloc-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn generate_planar(dir: &Path) -> String {
    let net = dir.join("net.json");
    let net_str = net.to_str().unwrap().to_string();
    let out = sparseloc(&[
        "generate", "--n", "6", "--dim", "2", "--radius", "100", "--seed", "3", "--rigid-for", "distance", "--out",
        &net_str,
    ]);
    assert_eq!(json_stdout(&out)["agents"], 6);
    net_str
}

#[test]
fn analyze_reports_rigidity_and_certificates() {
    let dir = scratch("analyze");
    let net = generate_planar(&dir);
    let report = json_stdout(&sparseloc(&["analyze", &net, "--max-s", "--coarse"]));
    assert_eq!(report["rigidity"]["is_infinitesimally_rigid"], true);
    assert_eq!(report["rigidity"]["nullity"], 3);
    assert!(report["certified_errors"].as_u64().is_some());

    let spark = json_stdout(&sparseloc(&["oracle", "spark", &net]));
    assert_eq!(spark["value"], 5);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn recover_writes_a_trace() {
    let dir = scratch("recover");
    let net = generate_planar(&dir);
    let scenario = dir.join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"network": {"source": "file", "path": "unused"}, "kind": "distance",
            "faults": {"count": 1}, "solver": {"max_iterations": 20, "initial_slack": 1.0},
            "trials": 1, "base_seed": 5}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sparseloc"))
        .args(["recover", &net, scenario.to_str().unwrap()])
        .env("SPARSELOC_OUT_DIR", &dir)
        .output()
        .unwrap();
    let result = json_stdout(&out);
    assert_eq!(result["result"]["support"], result["fault_set"]);
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# sparseloc solver trace v1"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn errors_exit_nonzero() {
    let out = sparseloc(&["analyze", "/nonexistent/net.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = sparseloc(&["generate", "--preset", "nosuch", "--out", "/tmp/x.json"]);
    assert!(!out.status.success());
}
