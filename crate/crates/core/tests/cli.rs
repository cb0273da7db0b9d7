//! Command-line contract: error messages, determinism and stage isolation.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spillover(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[run]
target = "hatesub"
inputs = ["{out}/synth/posts.ndjson"]
out = "out"
seed = 3

[lexicon]
background = ["{out}/synth/background.ndjson"]
ratings = "{out}/synth/ratings.tsv"

[its]
bandwidth_max = 120
cv_rounds = 20

[analysis]
banned = "{out}/synth/banned.txt"

[synth]
seed = 5
treatments = 40
controls_per_treatment = 3
pre_days = 200
post_days = 150
background_tokens = 50000
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_target_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "[run]\ninputs = [\"x.ndjson\"]\n");
    let o = spillover(&["--config", "run.toml", "cohort"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run.target"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "[its]\nbandwith_max = 100\n");
    let o = spillover(&["--config", "run.toml", "its"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bandwith_max"), "{}", stderr(&o));
}

#[test]
fn missing_prerequisite_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), SMALL);
    let o = spillover(&["--config", "run.toml", "its"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run the `match` stage first"), "{}", stderr(&o));
    let o = spillover(&["--config", "run.toml", "ingest"], tmp.path());
    assert!(stderr(&o).contains("run the `synth` stage first"), "{}", stderr(&o));
}

#[test]
fn stages_reproduce_deleted_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), SMALL);
    let o = spillover(&["--config", "run.toml", "all"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("out");
    assert!(out.join("config.resolved.toml").exists());

    for (stage, file) in [
        ("ingest", "corpus/posts.jsonl"),
        ("lexicon", "lexicon/lexicon.tsv"),
        ("cohort", "cohort/pool.txt"),
        ("match", "match/pairs.tsv"),
        ("its", "its/fit.json"),
        ("sensitivity", "sensitivity/sweep.csv"),
        ("analyze", "analyze/spearman.json"),
    ] {
        let path = out.join(file);
        let before = std::fs::read(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        let o = spillover(&["--config", "run.toml", stage], tmp.path());
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
        assert_eq!(std::fs::read(&path).unwrap(), before, "{file} differs after rerunning {stage}");
    }
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), SMALL);
    let o = spillover(
        &["--config", "run.toml", "--out", "elsewhere", "--seed", "9", "--threads", "2", "--granularity", "group-day", "synth"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = std::fs::read_to_string(tmp.path().join("elsewhere/config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 9"));
    assert!(resolved.contains("threads = 2"));
    assert!(resolved.contains("granularity = \"group-day\""));
    assert!(tmp.path().join("elsewhere/synth/posts.ndjson").exists());
}
