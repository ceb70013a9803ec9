//! End-to-end checks of the command-line interface: exit codes, artifact
//! writing, and diagnostics formatting.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn dbviz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbviz"))
}

fn spec(name: &str) -> PathBuf {
    fixture_dir().join("specs").join(format!("{name}.json"))
}

fn data(name: &str) -> PathBuf {
    fixture_dir().join("data").join(name)
}

#[test]
fn render_gallery_b_writes_svg_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.svg");
    let report = dir.path().join("b.json");
    let status = dbviz()
        .args(["render", "--spec"])
        .arg(spec("gallery_b"))
        .arg("--data")
        .arg(data("d1"))
        .arg("--out")
        .arg(&out)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let svg = std::fs::read_to_string(&out).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<svg"));
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.contains("\"faithful\": true"));
}

#[test]
fn check_with_unknown_table_exits_1_with_one_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(spec("gallery_b"))
        .unwrap()
        .replace("\"source\": \"T\"", "\"source\": \"Z\"");
    std::fs::write(&bad, text).unwrap();
    let output = dbviz()
        .args(["check", "--spec"])
        .arg(&bad)
        .arg("--data")
        .arg(data("d1"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    let diagnostics: Vec<&str> = stderr.lines().collect();
    assert_eq!(diagnostics.len(), 1, "stderr: {stderr}");
    // file:line:col: rule-id: message
    assert!(diagnostics[0].contains("unknown-table"), "stderr: {stderr}");
    assert!(
        diagnostics[0].contains("bad.json:"),
        "diagnostic must name the file: {stderr}"
    );
}

#[test]
fn missing_data_file_exits_2() {
    let empty = tempfile::tempdir().unwrap();
    let status = dbviz()
        .args(["check", "--spec"])
        .arg(spec("gallery_b"))
        .arg("--data")
        .arg(empty.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn no_partial_outputs_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.svg");
    let report = dir.path().join("report.json");
    let empty = tempfile::tempdir().unwrap();
    let status = dbviz()
        .args(["render", "--spec"])
        .arg(spec("gallery_b"))
        .arg("--data")
        .arg(empty.path())
        .arg("--out")
        .arg(&out)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists(), "no artifact may be left behind");
    assert!(!report.exists());
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn data_violations_exit_1() {
    // Dangling reference: A.bid = b9 has no B row.
    let data_dir = tempfile::tempdir().unwrap();
    std::fs::write(
        data_dir.path().join("A.csv"),
        "a,bid\n1.0,b1\n2.0,b9\n",
    )
    .unwrap();
    std::fs::copy(data("d2").join("B.csv"), data_dir.path().join("B.csv")).unwrap();
    let output = dbviz()
        .args(["check", "--spec"])
        .arg(spec("gallery_d"))
        .arg("--data")
        .arg(data_dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("violation"), "stderr: {stderr}");
    assert!(stderr.contains("b9"), "stderr: {stderr}");
}

#[test]
fn unfaithful_scene_exits_1_but_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.svg");
    let report = dir.path().join("r.json");
    let status = dbviz()
        .args(["render", "--spec"])
        .arg(spec("overplot"))
        .arg("--data")
        .arg(data("overplot"))
        .arg("--out")
        .arg(&out)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // Render proceeds on failure; the report records the verdict.
    assert!(out.exists());
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.contains("\"faithful\": false"));
}

#[test]
fn emit_marks_dumps_json_to_stdout() {
    let output = dbviz()
        .args(["compile", "--spec"])
        .arg(spec("gallery_b"))
        .arg("--data")
        .arg(data("d1"))
        .arg("--emit")
        .arg("marks")
        .arg("--report")
        .arg(tempfile::tempdir().unwrap().path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let marks: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(marks.get("views").is_some());
    assert!(marks.get("canvases").is_some());
}

#[test]
fn strict_mode_fails_on_lints() {
    let report = tempfile::tempdir().unwrap();
    let run = |strict: bool| {
        let mut cmd = dbviz();
        cmd.args(["compile", "--spec"])
            .arg(spec("lint_color_range"))
            .arg("--data")
            .arg(data("lint"))
            .arg("--report")
            .arg(report.path().join("r.json"));
        if strict {
            cmd.arg("--strict");
        }
        cmd.status().unwrap().code()
    };
    assert_eq!(run(false), Some(0), "lints are warnings by default");
    assert_eq!(run(true), Some(1), "strict mode promotes lints to failures");
}

#[test]
fn proximity_env_var_changes_achieved_level() {
    // align_d stops at level 3 because the views sit 100px apart; raising
    // the proximity threshold above that promotes it to level 4.
    let report_dir = tempfile::tempdir().unwrap();
    let report = report_dir.path().join("r.json");
    let status = dbviz()
        .args(["compile", "--spec"])
        .arg(spec("align_d"))
        .arg("--data")
        .arg(data("align"))
        .arg("--report")
        .arg(&report)
        .env("DBVIZ_PROXIMITY_PX", "150")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("achieved level 4"), "report: {text}");
}

#[test]
fn jitter_flags_clear_overplot() {
    let report_dir = tempfile::tempdir().unwrap();
    let report = report_dir.path().join("r.json");
    let status = dbviz()
        .args(["compile", "--spec"])
        .arg(spec("overplot"))
        .arg("--data")
        .arg(data("overplot"))
        .arg("--report")
        .arg(&report)
        .args(["--jitter", "5", "--seed", "7"])
        .status()
        .unwrap();
    // The jitter intervention clears the group, repairing faithfulness.
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["overplot"].as_array().unwrap().len(), 0);
    assert_eq!(parsed["faithful"], serde_json::Value::Bool(true));
}

/// Keep fixtures honest: the repository ships no stale `.tmp` leftovers.
#[test]
fn fixture_tree_is_clean() {
    fn walk(dir: &Path, hits: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, hits);
            } else if path.extension().and_then(|e| e.to_str()) == Some("tmp") {
                hits.push(path);
            }
        }
    }
    let mut hits = Vec::new();
    walk(&fixture_dir(), &mut hits);
    assert!(hits.is_empty(), "stale temp files: {hits:?}");
}
