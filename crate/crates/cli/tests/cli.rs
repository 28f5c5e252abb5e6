use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_omlprob"));
    c.env_remove("OMLPROB_FIXTURES");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    let o = run(&a);
    (serde_json::from_str(&stdout(&o)).expect("json output"), o.status.code().unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("omlprob-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_lattices() {
    let o = run(&["validate", "l1.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("valid OML, 2 blocks, horizontal sum: yes"));

    let (v, code) = json(&["validate", "l2.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["horizontal_sum"], false);
    assert_eq!(v["horizontal_sum_witness"]["intersection"], serde_json::json!(["0", "c", "c'", "1"]));
}

#[test]
fn blocks_and_hsum() {
    let (v, _) = json(&["blocks", "l1.json"]);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 2);
    let (v, code) = json(&["hsum", "l2.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["horizontal_sum"], false);
}

#[test]
fn classify_examples() {
    let (v, code) = json(&["smap", "classify", "--smap", "p1_smap.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["classification"], "strongly_causal");
    let (v, _) = json(&["smap", "classify", "--lattice", "l2.json", "--smap", "p2_smap.json"]);
    assert_eq!(v["classification"], "causal");
    let o = run(&["smap", "classify", "--lattice", "l2.json", "--smap", "p2_smap.json"]);
    assert!(stdout(&o).starts_with("causal, not strongly causal"));
}

#[test]
fn observables() {
    let (v, code) = json(&["expect", "--smap", "p1_smap.json", "--obs", "obs_a_weighted.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["expectation"], "-1/10");
    let (v, code) = json(&["oplus", "--smap", "p1_smap.json", "--obs", "obs_a.json", "--obs", "obs_b.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["expectation"], "4/5");
}

#[test]
fn granger_commands() {
    let (v, code) = json(&[
        "granger", "test", "--lattice", "p1_process.json", "--smap", "p1_smap.json", "--cause", "Y@t", "--effect", "X@t1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["causes"], true);
    let (v, code) = json(&[
        "granger", "test", "--lattice", "p1_process.json", "--smap", "p1_smap.json", "--cause", "X@t1", "--effect", "Y@t",
    ]);
    // A negative verdict is still a successful run.
    assert_eq!(code, 0);
    assert_eq!(v["causes"], false);
    let (v, _) = json(&["granger", "classic", "ts_lagged.csv"]);
    assert_eq!(v["verdict"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["validate"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "/nonexistent/nowhere.json"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = scratch("exit");
    let bad = dir.join("bad_smap.json");
    std::fs::write(
        &bad,
        r#"{"lattice": "l1.json", "atom_table": {"a": {"a": "1/2", "a'": "0", "b": "1/2", "b'": "0"},
            "a'": {"a": "0", "a'": "1/2", "b": "1/2", "b'": "0"},
            "b": {"a": "1/2", "a'": "1/2", "b": "1", "b'": "0"},
            "b'": {"a": "0", "a'": "0", "b": "0", "b'": "1/2"}}}"#,
    )
    .unwrap();
    let o = run(&["smap", "validate", "--smap", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn errors_print_no_verdict() {
    let args = [
        "granger", "fit", "--lattice", "p1_process.json", "--xi-first", "exp_xi_first.csv", "--eta-first",
        "exp_eta_first_shifted.csv", "--tol", "1/100",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    let (v, code) = json(&args);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "failed");
    assert!(v["error"].as_str().unwrap().contains("8/25"));
    assert!(v.get("document").is_none());
}

#[test]
fn parse_errors_carry_position() {
    let dir = scratch("parse");
    let f = dir.join("trunc.json");
    std::fs::write(&f, "{\n  \"kind\": \"horizontal_sum\",\n  \"blocks\": [\n").unwrap();
    let o = run(&["validate", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("trunc.json") && err.contains("trunc.json:4:"), "{err}");
}

#[test]
fn json_output_is_deterministic() {
    for args in [
        &["smap", "classify", "--lattice", "l2.json", "--smap", "p2_smap.json"][..],
        &["smap", "generate", "--seed", "9"][..],
        &["granger", "fit", "--lattice", "p1_process.json", "--xi-first", "exp_xi_first.csv", "--eta-first", "exp_eta_first.csv"][..],
    ] {
        let mut a = vec!["--json"];
        a.extend_from_slice(args);
        let first = run(&a).stdout;
        let second = run(&a).stdout;
        assert!(!first.is_empty());
        assert_eq!(first, second, "{args:?}");
    }
}

#[test]
fn text_and_json_carry_the_same_facts() {
    let args = ["smap", "properties", "--smap", "p1_smap.json"];
    let text = stdout(&run(&args));
    let (v, _) = json(&args);
    for key in v.as_object().unwrap().keys() {
        if key == "exit_code" {
            continue;
        }
        assert!(text.contains(key.as_str()) || key == "summary", "text lacks {key}");
    }
}

#[test]
fn generated_smap_round_trips_through_validate() {
    let dir = scratch("gen");
    let out = dir.join("gen.json");
    let o = run(&["smap", "generate", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["smap", "validate", "--smap", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fixtures_env_overrides_bundled() {
    let dir = scratch("env");
    // Three blocks under the bundled name, which has two.
    std::fs::write(
        dir.join("l1.json"),
        r#"{"kind": "horizontal_sum", "blocks": [{"atoms": ["x", "y"]}, {"atoms": ["u", "v"]}, {"atoms": ["s", "t"]}]}"#,
    )
    .unwrap();
    let o = bin().env("OMLPROB_FIXTURES", &dir).args(["validate", "l1.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("valid OML, 3 blocks, horizontal sum: yes"), "{}", stdout(&o));
}
