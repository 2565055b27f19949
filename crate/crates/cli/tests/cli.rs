use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::io::Write;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structsheet")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_text_lists_groups() {
    let out = run(&["analyze", path(&fixture("carloan.wbk.json"))]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("C2:C9  =B2*0.035"), "{text}");
    assert!(text.contains("D2:D8  slot 1  B2:B8"), "{text}");
}

#[test]
fn analyze_json_is_a_structure_model() {
    let out = run(&["analyze", "--json", path(&fixture("carloan.wbk.json"))]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["groups"].as_array().unwrap().len(), 4);
    assert!(v["edges"].is_array());
}

#[test]
fn check_exit_codes() {
    let clean = run(&["check", path(&fixture("carloan.wbk.json"))]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(stdout(&clean).starts_with("clean"));

    let dirty = run(&["check", path(&fixture("carloan_c6edited.wbk.json"))]);
    assert_eq!(dirty.status.code(), Some(1));
    assert!(stdout(&dirty).contains("DeviantCell  C6"));

    let json = run(&["check", "--json", path(&fixture("carloan_c6edited.wbk.json"))]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["violations"][0]["kind"], "DeviantCell");
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&["check", "/nonexistent/book.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn auto_repair_writes_a_clean_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("fixed.json");
    let out = run(&["repair", "--auto", path(&fixture("carloan_c6edited.wbk.json")), "--out", path(&out_file)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let again = run(&["check", path(&out_file)]);
    assert_eq!(again.status.code(), Some(0));
}

#[test]
fn interactive_repair_reads_choices() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("fixed.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_structsheet"))
        .args(["repair", "--interactive", path(&fixture("carloan_c6edited.wbk.json")), "--out", path(&out_file)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"2\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(run(&["check", path(&out_file)]).status.code(), Some(0));
    let num = |cell: &str| stdout(&run(&["eval", path(&out_file), "--cell", cell])).trim().parse::<f64>().unwrap();
    assert!((num("C7") - num("B7") * 0.05).abs() < 1e-9);
}

#[test]
fn skipping_every_candidate_leaves_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("same.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_structsheet"))
        .args(["repair", "--interactive", path(&fixture("carloan_c6edited.wbk.json")), "--out", path(&out_file)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("1 violation(s) remain"));
}

#[test]
fn dry_run_refactor_leaves_file_alone() {
    let src = fixture("carloan.wbk.json");
    let before = std::fs::read(&src).unwrap();
    let out = run(&["refactor", path(&src), "--op", "split", "--group", "D2:D8", "--at", "B+C", "--dry-run"]);
    assert!(out.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["applied"], false);
    assert_eq!(plan["valueImpact"], "preserving");
    assert_eq!(std::fs::read(&src).unwrap(), before);
}

#[test]
fn refactor_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("moved.json");
    let src = fixture("carloan.wbk.json");
    let out = run(&["refactor", path(&src), "--op", "move", "--group", "D2:D8", "--to", "F2", "--out", path(&out_file)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b3 = run(&["eval", path(&out_file), "--cell", "F2"]);
    assert_eq!(stdout(&b3).trim(), "20875");
    let original = run(&["eval", path(&src), "--json"]);
    let moved = run(&["eval", path(&out_file), "--json"]);
    let (a, b): (serde_json::Value, serde_json::Value) =
        (serde_json::from_slice(&original.stdout).unwrap(), serde_json::from_slice(&moved.stdout).unwrap());
    assert_eq!(a["B9"], b["B9"]);
}

#[test]
fn invalid_operation_exit_code() {
    let out = run(&["refactor", path(&fixture("carloan.wbk.json")), "--op", "split", "--group", "D2:D8", "--at", "", "--dry-run"]);
    assert_eq!(out.status.code(), Some(3));
    let overlap = run(&["refactor", path(&fixture("carloan.wbk.json")), "--op", "move", "--group", "D2:D8", "--to", "C2", "--dry-run"]);
    assert_eq!(overlap.status.code(), Some(3));
}

#[test]
fn eval_single_cell() {
    let out = run(&["eval", path(&fixture("carloan.wbk.json")), "--cell", "D2"]);
    assert_eq!(stdout(&out).trim(), "20875");
}

#[test]
fn csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "1,=A1*2\n2,=A2*2\n3,=A3*2\n").unwrap();
    let out = run(&["analyze", path(&csv)]);
    assert!(stdout(&out).contains("B1:B3  =A1*2"), "{}", stdout(&out));
}
