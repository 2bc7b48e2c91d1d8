//! End-to-end tests of the command-line interface: output formats,
//! determinism, and exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static COUNTER: AtomicU32 = AtomicU32::new(0);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_infdelay")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "infdelay-cli-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn builtin_spec(name: &str) -> PathBuf {
    temp_file(
        "system.json",
        &format!(r#"{{"dimension": 1, "kernel": {{"type": "builtin", "name": "{name}"}}}}"#),
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_column(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect()
}

#[test]
fn impulse_response_matches_closed_form() {
    let spec = builtin_spec("ex6.3");
    let out = run(&["simulate", spec.to_str().unwrap(), "--n-end", "3", "--impulse", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("n,x_1\n"), "{text}");
    let values = csv_column(&text);
    assert_eq!(values, vec![0.0, 1.0, 0.5, 0.25]);
}

#[test]
fn history_and_forcing_files_are_honored() {
    let spec = builtin_spec("ex6.4");
    let phi = temp_file("phi.json", r#"[{"depth": 0, "value": [2.0]}]"#);
    let forcing = temp_file("f.json", "[[1.0], [0.0]]");
    let out = run(&[
        "simulate",
        spec.to_str().unwrap(),
        "--n-end",
        "2",
        "--phi-json",
        phi.to_str().unwrap(),
        "--forcing-json",
        forcing.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // x(0) = 2; x(1) = 2 x(0) + 1 = 5; x(2) = x(1) + x(0) = 7.
    assert_eq!(csv_column(&stdout(&out)), vec![2.0, 5.0, 7.0]);
}

#[test]
fn reports_are_byte_identical_for_identical_invocations() {
    let spec = builtin_spec("ex6.3");
    let args = [
        "classify",
        spec.to_str().unwrap(),
        "--gamma",
        "-0.5",
        "--n-starts",
        "16",
        "--probe-depth",
        "8",
        "--seed",
        "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout, "classification reports must be deterministic");

    let gain_args = ["gain", spec.to_str().unwrap(), "--p", "1", "--q", "inf", "--horizon", "32"];
    let a = run(&gain_args);
    let b = run(&gain_args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "gain reports must be deterministic");
}

#[test]
fn malformed_input_exits_with_code_2() {
    let garbled = temp_file("bad.json", "{ not json");
    let out = run(&["simulate", garbled.to_str().unwrap(), "--n-end", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let unknown = temp_file(
        "unknown.json",
        r#"{"dimension": 1, "kernel": {"type": "builtin", "name": "nope"}}"#,
    );
    let out = run(&["gain", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing = std::env::temp_dir().join("infdelay-definitely-missing.json");
    let out = run(&["profile", missing.to_str().unwrap(), "--gamma", "0"]);
    assert_eq!(out.status.code(), Some(2));

    // Exponent order violations are input errors too.
    let spec = builtin_spec("ex6.3");
    let out = run(&["gain", spec.to_str().unwrap(), "--p", "inf", "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown flags are rejected by the argument parser with the same code.
    let out = run(&["examples", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_lists_every_builtin() {
    let out = run(&["examples"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["ex6.1", "ex6.2", "ex6.3", "ex6.4", "ex6.4p", "ex6.5", "sec7"] {
        assert!(text.contains(name), "missing {name} in listing:\n{text}");
    }
}

#[test]
fn identify_reports_the_kernel_band() {
    let spec = builtin_spec("ex6.3");
    let out = run(&[
        "identify",
        spec.to_str().unwrap(),
        "--n0",
        "2",
        "--k-max",
        "3",
        "--gain-horizon",
        "32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["n0"], 2);
    assert_eq!(doc["bound_satisfied"], true);
    // L(2, 0) = 1/2 is the head coefficient at the anchor.
    let first = doc["entries"][0]["matrix"][0][0].as_f64().unwrap();
    assert!((first - 0.5).abs() < 1e-12);
}
