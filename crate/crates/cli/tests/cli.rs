use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use concept_realm::report::{build_manifest, read_manifest};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concept-realm")).args(args).output().expect("binary runs")
}

fn mini_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/config.toml").display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = bin(&["pipeline", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--no-such-flag"), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("usage"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();
    let o = bin(&["ingest", "--input", "x.jsonl", "--out", &out]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent-export.jsonl").display().to_string();
    let out = dir.path().join("out").display().to_string();
    let o = bin(&["ingest", "--input", &missing, "--out", &out, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&missing), "{}", stderr(&o));
}

#[test]
fn version_lists_format_versions() {
    let o = bin(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("model format 1") && text.contains("manifest format 1"), "{text}");
}

#[test]
fn synth_is_deterministic() {
    let a = bin(&["synth", "--seed", "7", "--topics", "3"]);
    let b = bin(&["synth", "--seed", "7", "--topics", "3"]);
    let c = bin(&["synth", "--seed", "8", "--topics", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 200);
}

#[test]
fn synth_writes_files_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traces.csv");
    let truth = dir.path().join("truth.json");
    let o = bin(&[
        "synth",
        "--scenario",
        "traces",
        "--seed",
        "3",
        "--quarters",
        "10",
        "--out",
        out.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("trace,planted,q0,q1,"));
    assert_eq!(csv.lines().count(), 101);
    let truth: serde_json::Value = serde_json::from_str(&fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(truth["traces"].as_array().unwrap().len(), 100);
}

#[test]
fn synth_rejects_invalid_parameters() {
    let o = bin(&["synth", "--scenario", "project", "--seed", "1", "--leaver-topic", "9", "--leaver-quarter", "2"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn malformed_lines_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("export.jsonl");
    let good = bin(&["synth", "--seed", "2", "--topics", "2", "--documents", "60"]).stdout;
    let mut text = String::from_utf8(good).unwrap();
    text.push_str("{not json\n");
    fs::write(&input, text).unwrap();
    let out = dir.path().join("out");
    let o = bin(&["ingest", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let errors = fs::read_to_string(out.join("ingest_errors.csv")).unwrap();
    assert!(errors.starts_with("source,line,message\nexport.jsonl,61,"), "{errors}");
    assert!(out.join("SYN/documents.jsonl").is_file());
    assert!(out.join("SYN/vocabulary.json").is_file());
}

#[test]
fn stage_before_ingest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never-ingested");
    let o = bin(&["train", "--out", out.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("never-ingested"));
}

#[test]
fn pipeline_on_mini_corpus_writes_full_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin(&["pipeline", "--config", &mini_config(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for project in ["ALPHA", "BETA", "GAMMA"] {
        for file in [
            "documents.jsonl",
            "vocabulary.json",
            "select_k.csv",
            "model.json",
            "model.bin",
            "realm.jsonl",
            "rejected.csv",
            "alignment.csv",
            "volatility.csv",
            "mse.csv",
            "keepers.csv",
            "leavers.csv",
            "impact.csv",
            "entropy.csv",
            "mrr.csv",
        ] {
            assert!(out.join(project).join(file).is_file(), "{project}/{file}");
        }
    }
    for file in ["summary.csv", "brackets.csv", "ingest_errors.csv", "manifest.json"] {
        assert!(out.join(file).is_file(), "{file}");
    }
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest, build_manifest(&out).unwrap(), "manifest covers every file");
    let leavers = fs::read_to_string(out.join("ALPHA/leavers.csv")).unwrap();
    assert!(leavers.lines().nth(1).unwrap().starts_with("ALPHA,birch,2012-Q1,"), "{leavers}");
}

#[test]
fn pipeline_equals_stages_run_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let chained = dir.path().join("chained");
    let staged = dir.path().join("staged");
    let config = mini_config();
    let o = bin(&["pipeline", "--config", &config, "--out", chained.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for stage in ["ingest", "select-k", "train", "realm", "analyze", "report"] {
        let o = bin(&[stage, "--config", &config, "--out", staged.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    assert_eq!(fs::read(chained.join("manifest.json")).unwrap(), fs::read(staged.join("manifest.json")).unwrap());
}

#[test]
fn fixed_k_skips_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = mini_config();
    let args = ["--config", &config, "--out", out.to_str().unwrap(), "--k", "2"];
    for stage in ["ingest", "train", "realm"] {
        let o = bin(&[&[stage][..], &args[..]].concat());
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("BETA/model.json")).unwrap()).unwrap();
    assert_eq!(model["k"], 2);
    assert!(!out.join("BETA/select_k.csv").exists());
}

#[test]
fn indirect_cosine_selection_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = mini_config();
    let args = ["--config", &config, "--out", out.to_str().unwrap(), "--k-max", "4", "--coherence", "cv"];
    for stage in ["ingest", "select-k"] {
        let o = bin(&[&[stage][..], &args[..]].concat());
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    let table = fs::read_to_string(out.join("BETA/select_k.csv")).unwrap();
    assert_eq!(table.lines().count(), 5, "{table}");
    assert_eq!(bin(&[&["select-k"][..], &args[..6], &["--coherence", "umass"]].concat()).status.code(), Some(1));
}
