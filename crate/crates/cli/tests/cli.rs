use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwelfare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn efficient_allocation_exits_zero() {
    let out = run(&[
        "efficient",
        path(&data("example4.json")),
        "--allocation",
        "xbar1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["answer"], "POSSIBLY_EFFICIENT");
}

#[test]
fn garp_violation_exits_one() {
    let out = run(&["garp", path(&data("violating.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["certificate"]["kind"], "garp_violation");
}

#[test]
fn emitted_certificate_verifies_and_tampering_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let d = data("dominated.json");
    let out = run(&[
        "--certificate",
        path(&cert),
        "efficient",
        path(&d),
        "--allocation",
        "xbar",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["answer"], "DOMINATED");

    let ok = run(&["verify", path(&cert), path(&d)]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["answer"], "PASS");

    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let kind = c["kind"].clone();
    c["xbar"] = serde_json::json!({"1": ["1", "1"], "2": ["1", "1"]});
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&c).unwrap()).unwrap();
    let out = run(&["verify", path(&bad), path(&d)]);
    assert_eq!(kind, "domination");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["answer"], "FAIL");
}

#[test]
fn full_output_is_accepted_by_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = data("example4.json");
    let out = run(&["efficient", path(&d), "--allocation", "xbar2"]);
    let saved = dir.path().join("out.json");
    std::fs::write(&saved, &out.stdout).unwrap();
    let ok = run(&["verify", path(&saved), path(&d)]);
    assert_eq!(json(&ok)["answer"], "PASS");
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    assert_eq!(run(&["garp", path(&junk)]).status.code(), Some(2));
    let out = run(&[
        "efficient",
        path(&data("example4.json")),
        "--allocation",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let a = run(&["gen", "--seed", "11", "--agents", "3"]);
    let b = run(&["gen", "--seed", "11", "--agents", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(
        a.stdout,
        run(&["gen", "--seed", "12", "--agents", "3"]).stdout
    );

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("economy.json");
    std::fs::write(&file, &a.stdout).unwrap();
    let out = run(&["walras-price", path(&file), "--price", "equilibrium"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["walras-alloc", path(&file), "--allocation", "equilibrium"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn dump_lp_lists_labeled_rows() {
    let out = run(&[
        "--dump-lp",
        "efficient",
        path(&data("example4.json")),
        "--allocation",
        "xbar1",
    ]);
    let v = json(&out);
    assert!(v["lp"].is_object());
    assert!(v["lp"].to_string().contains("label"));
    let plain = run(&[
        "efficient",
        path(&data("example4.json")),
        "--allocation",
        "xbar1",
    ]);
    assert!(json(&plain).get("lp").is_none());
}

#[test]
fn kaldor_with_larger_total_is_inconclusive() {
    let d = data("dominated.json");
    let out = run(&[
        "kaldor",
        path(&d),
        "--allocation",
        "observed",
        "--versus",
        "xbar",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["answer"], "INCONCLUSIVE");
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("out.json");
    std::fs::write(&saved, &out.stdout).unwrap();
    assert_eq!(
        json(&run(&["verify", path(&saved), path(&d)]))["answer"],
        "PASS"
    );
}

#[test]
fn single_agent_commands() {
    let d = data("example4.json");
    let out = run(&["rationalize", path(&d), "--agent", "2", "--utility"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["rep-consumer", path(&data("representative.json"))]);
    assert_eq!(json(&out)["answer"], "REPRESENTABLE");
}
