//! The `choicekit` binary on the bundled choices13k sample.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/choices13k_sample.csv")
}

fn choicekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choicekit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let cfg = format!(
        "kind = \"forward-task-1\"\ndataset = \"{}\"\nseed = 5\nsamples_positive = 1\nsamples_negative = 1\ngrid_points = 5\n\n[[agents]]\ntype = \"synthetic\"\nspec = \"max-ev\"\n\n[[agents]]\ntype = \"synthetic\"\nname = \"noisy\"\nspec = \"luce-noisy:0.2\"\nseed = 3\n",
        fixture().display()
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn catalog_lists_47_decisions() {
    let text = ok(choicekit(&["catalog"]));
    assert_eq!(text.lines().count(), 48);
    assert!(text.starts_with("id,option1,option2,option3,option4,option5,chosen"));
}

#[test]
fn ingest_filters_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let f = fixture();
    let text = ok(choicekit(&["ingest", "--dataset", f.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert!(text.starts_with("200 problems, 120 after filtering"), "{text}");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ingest.json")).unwrap()).unwrap();
    assert_eq!(summary["ambiguous"], 40);
    assert_eq!(summary["no_feedback"], 50);
    assert_eq!(std::fs::read_to_string(out.join("filtered.jsonl")).unwrap().lines().count(), 120);
}

#[test]
fn evaluate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("runs");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    ok(choicekit(&["--config", c, "--out", o, "eval-forward"]));
    ok(choicekit(&["--config", c, "--out", o, "--agent", "noisy", "--task", "2", "eval-forward"]));
    ok(choicekit(&["--config", c, "--out", o, "--agent", "fixed-first", "--task", "negative", "eval-inverse"]));
    assert!(out.join("max-ev/predict-individual-zero-shot/record.json").exists());
    assert!(out.join("max-ev/predict-individual-zero-shot/raw.jsonl").exists());
    assert!(out.join("noisy/predict-proportion-zero-shot/record.json").exists());
    assert!(out.join("fixed-first/inverse-negative-zero-shot/record.json").exists());
    let md = ok(choicekit(&["--config", c, "--out", o, "report"]));
    assert!(md.contains("| Humans |"));
    assert!(md.contains("max-ev predict-individual zero-shot"));
    assert!(md.contains("| fixed-first | negative | zero-shot | absolute |"));
    assert_eq!(std::fs::read_to_string(out.join("tables.md")).unwrap(), md);
    assert!(!out.join(".choicekit.lock").exists());
}

#[test]
fn locked_output_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("runs");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(".choicekit.lock"), "1").unwrap();
    let res = choicekit(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "eval-forward"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("locked"));
}

#[test]
fn bad_flags_fail_cleanly() {
    assert!(!choicekit(&["--task", "7", "eval-forward"]).status.success());
    assert!(!choicekit(&["--samples", "0", "eval-inverse"]).status.success());
    assert!(!choicekit(&["eval-forward"]).status.success());
}
