use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_socialforge");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("SOCIALFORGE_LOG", "error")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

const SMALL: &str = r#"{"strategy": {"graphmind": {"build": {"n_bots": 40, "n_communities": 4}}}}"#;

fn small_build(dir: &Path, out: &str) -> Output {
    let cfg = write_config(dir, "small.json", SMALL);
    run(
        dir,
        &["--config", cfg.to_str().unwrap(), "--out", out, "build"],
    )
}

/// Three-node directed cycle written by hand.
fn cycle_fixture(dir: &Path) -> PathBuf {
    let g = dir.join("cycle");
    fs::create_dir_all(&g).unwrap();
    fs::write(
        g.join("manifest.json"),
        r#"{"schema_version": 1, "node_count": 3, "edge_count": 3, "follow_count": 3, "interaction_count": 0,
            "tool_version": "test", "partial": false, "has_profiles": false, "gzip": false}"#,
    )
    .unwrap();
    fs::write(
        g.join("edges.jsonl"),
        "{\"source\":0,\"target\":1,\"kind\":\"follow\"}\n{\"source\":1,\"target\":2,\"kind\":\"follow\"}\n{\"source\":2,\"target\":0,\"kind\":\"follow\"}\n",
    )
    .unwrap();
    g
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_succeeds_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_build(tmp.path(), "a")), 0);
    assert_eq!(code(&small_build(tmp.path(), "b")), 0);
    for f in [
        "manifest.json",
        "edges.jsonl",
        "nodes.jsonl",
        "report.json",
        "interactions.jsonl",
        "chain_log.jsonl",
    ] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gzip_outputs_carry_suffix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", SMALL);
    let out = run(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--gzip",
            "--out",
            "g",
            "build",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(tmp.path().join("g/edges.jsonl.gz").exists());
    assert!(tmp.path().join("g/interactions.jsonl.gz").exists());
    assert_eq!(json(&tmp.path().join("g/manifest.json"))["gzip"], true);
    assert_eq!(code(&run(tmp.path(), &["--out", "m", "metrics", "g"])), 0);
}

#[test]
fn iteration_bound_gives_partial_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tight.json",
        r#"{"strategy": {"graphmind": {"build": {"n_bots": 40, "n_communities": 4, "max_completion_iters": 1}}}}"#,
    );
    let out = run(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--out", "p", "build"],
    );
    assert_eq!(code(&out), 3);
    assert_eq!(json(&tmp.path().join("p/manifest.json"))["partial"], true);
}

#[test]
fn bad_input_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{"strategy": {"graphmind": {"build": {"tau": 1.5}}}}"#,
    );
    assert_eq!(
        code(&run(
            tmp.path(),
            &["--config", bad.to_str().unwrap(), "build"]
        )),
        1
    );
    let unknown = write_config(tmp.path(), "unknown.json", r#"{"no_such_field": 1}"#);
    assert_eq!(
        code(&run(
            tmp.path(),
            &["--config", unknown.to_str().unwrap(), "build"]
        )),
        1
    );
    assert_eq!(
        code(&run(
            tmp.path(),
            &["synth", "--n", "3", "--communities", "5"]
        )),
        1
    );
    assert_eq!(code(&run(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(tmp.path(), &["--help"])), 0);
}

#[test]
fn missing_or_corrupt_inputs_are_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["metrics", "nowhere"])), 2);
    let g = cycle_fixture(tmp.path());
    fs::write(
        g.join("edges.jsonl"),
        "{\"source\":0,\"target\":9,\"kind\":\"follow\"}\n",
    )
    .unwrap();
    assert_ne!(code(&run(tmp.path(), &["metrics", "cycle"])), 0);
}

#[test]
fn synth_writes_requested_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["--out", "s", "synth", "--n", "100", "--communities", "5"],
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(tmp.path().join("s/profiles.jsonl")).unwrap();
    let rows: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 100);
    let communities: std::collections::BTreeSet<String> =
        rows.iter().map(|r| r["community"].to_string()).collect();
    assert_eq!(communities.len(), 5);
}

#[test]
fn metrics_on_a_cycle() {
    let tmp = tempfile::tempdir().unwrap();
    cycle_fixture(tmp.path());
    let out = run(
        tmp.path(),
        &["--out", "m", "metrics", "cycle", "--log-bins"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&tmp.path().join("m/metrics.json"));
    assert_eq!(m["avg_hop"], 1.5);
    assert_eq!(m["degeneracy"], 2);
    let csv = fs::read_to_string(tmp.path().join("m/metrics.csv")).unwrap();
    assert!(csv.starts_with("metric,key,value\n"));
}

#[test]
fn metrics_on_an_empty_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("empty");
    fs::create_dir_all(&g).unwrap();
    fs::write(
        g.join("manifest.json"),
        r#"{"schema_version": 1, "node_count": 5, "edge_count": 0, "follow_count": 0, "interaction_count": 0,
            "tool_version": "test", "partial": false, "has_profiles": false, "gzip": false}"#,
    )
    .unwrap();
    fs::write(g.join("edges.jsonl"), "").unwrap();
    let out = run(tmp.path(), &["--out", "m", "metrics", "empty"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        json(&tmp.path().join("m/metrics.json"))["avg_hop"],
        Value::Null
    );
}

#[test]
fn compare_needs_two_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    cycle_fixture(tmp.path());
    assert_eq!(code(&small_build(tmp.path(), "a")), 0);
    assert_eq!(code(&run(tmp.path(), &["compare", "a"])), 1);
    let out = run(tmp.path(), &["--out", "c", "compare", "a", "cycle"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(tmp.path().join("c/compare.csv")).unwrap();
    assert_eq!(csv, String::from_utf8(out.stdout).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("a,graphmind,"));
}

#[test]
fn export_chains_matches_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_build(tmp.path(), "a")), 0);
    let out = run(tmp.path(), &["--out", "x", "export-chains", "a"]);
    assert_eq!(code(&out), 0);
    let n = fs::read_to_string(tmp.path().join("x/chains.jsonl"))
        .unwrap()
        .lines()
        .count();
    let report = json(&tmp.path().join("a/report.json"));
    assert_eq!(
        n as u64,
        report["completion"]["chains_generated"].as_u64().unwrap()
    );
    assert!(n > 0);

    cycle_fixture(tmp.path());
    assert_ne!(code(&run(tmp.path(), &["export-chains", "cycle"])), 0);
}
