//! Acceptance criteria. Each prints one PASS/FAIL line; the process fails
//! if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command as Process, ExitCode};
use std::time::{Duration, Instant};

use clap::Parser;

use concept_realm::analytics::{
    count_keepers, default_alignment_year, detect_departure, detect_leavers, evaluate_alignment, mean_reciprocal_rank_of,
    normalized_entropy, paired_t_test, turnover_impact, AlignmentConfig, TurnoverImpact, DEFAULT_LEAVER_RATIO,
};
use concept_realm::corpus::{
    group_by_project, parse_export_str, vectorize, Document, PreparedDoc, Preprocessor, Vocabulary, VocabularyOptions,
};
use concept_realm::modelselect::{jaccard, npmi, select_k, SweepConfig, WindowStats};
use concept_realm::realm::{
    absolute_frequency, build_realm, developer_acf, developer_frequencies, issue_frequency, ConceptRealm, Scope, Window,
    Windowing, DEFAULT_FOLD_IN_ITERATIONS,
};
use concept_realm::synth::{matched_cosine, ActivityTrace};
use concept_realm::topicmodel::{train_lda, TrainConfig};
use concept_realm_cli::args::{Cli, Command, StageArgs};
use concept_realm_cli::config::RunConfig;
use concept_realm_cli::{stages, synth};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

/// Runs the `synth` command in-process and returns its output and truth.
fn synth(args: &[&str]) -> (Vec<u8>, serde_json::Value) {
    let argv = ["concept-realm", "synth"].iter().chain(args);
    let Command::Synth(a) = Cli::try_parse_from(argv).expect("synth arguments").command else {
        unreachable!()
    };
    synth::generate(&a).expect("synth succeeds")
}

fn prepared_from_export(bytes: &[u8]) -> (String, Vec<PreparedDoc>) {
    let parsed = parse_export_str(std::str::from_utf8(bytes).unwrap());
    assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
    let corpus = group_by_project(parsed.issues, parsed.comments).remove(0);
    let docs = Preprocessor::default().prepare(&corpus);
    (corpus.project_key, docs)
}

fn vectorized(prepared: &[PreparedDoc], no_below: usize) -> (Vec<Document>, Vocabulary) {
    let vocab = VocabularyOptions { no_below, ..Default::default() }.build(prepared).unwrap().vocabulary;
    (prepared.iter().map(|d| vectorize(d, &vocab)).collect(), vocab)
}

fn planted_corpus(seed: u64) -> (Vec<Document>, Vocabulary, Vec<Vec<f64>>) {
    let (bytes, truth) = synth(&["--seed", &seed.to_string(), "--topics", "3"]);
    let (_, prepared) = prepared_from_export(&bytes);
    let (docs, vocab) = vectorized(&prepared, VocabularyOptions::default().no_below);
    let topic_terms: Vec<Vec<String>> = serde_json::from_value(truth["topic_terms"].clone()).unwrap();
    let rows = topic_terms
        .iter()
        .map(|terms| {
            let support: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
            let n = support.len() as f64;
            vocab.terms().iter().map(|t| if support.contains(t.as_str()) { 1.0 / n } else { 0.0 }).collect()
        })
        .collect();
    (docs, vocab, rows)
}

fn project_realm(args: &[&str], k: usize, seed: u64, windowing: Windowing) -> ConceptRealm {
    let (bytes, _) = synth(args);
    let (key, prepared) = prepared_from_export(&bytes);
    let (docs, vocab) = vectorized(&prepared, 5);
    let model = train_lda(&docs, &vocab, &TrainConfig::new(k, seed)).unwrap();
    let (realm, rejected) = build_realm(&key, &docs, &model, windowing, DEFAULT_FOLD_IN_ITERATIONS).unwrap();
    assert!(rejected.is_empty());
    realm
}

/// Realms of the bundled mini-corpus (through the full pipeline) and of
/// several synthetic corpora.
fn test_realms(scratch: &Path) -> Vec<ConceptRealm> {
    let args = StageArgs {
        config: Some(mini_dir().join("config.toml")),
        out: Some(scratch.join("mini")),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(&args).unwrap();
    stages::pipeline(&cfg).unwrap();
    let mut realms: Vec<ConceptRealm> = ["ALPHA", "BETA", "GAMMA"]
        .iter()
        .map(|p| ConceptRealm::from_jsonl(&fs::read_to_string(cfg.output.join(p).join("realm.jsonl")).unwrap()).unwrap())
        .collect();
    let (bytes, _) = synth(&["--seed", "5", "--topics", "3"]);
    let (key, prepared) = prepared_from_export(&bytes);
    let (docs, vocab) = vectorized(&prepared, 15);
    let model = train_lda(&docs, &vocab, &TrainConfig::new(3, 5)).unwrap();
    realms.push(build_realm(&key, &docs, &model, Windowing::Quarterly, DEFAULT_FOLD_IN_ITERATIONS).unwrap().0);
    realms.push(project_realm(&["--scenario", "project", "--seed", "31"], 3, 31, Windowing::Yearly));
    realms.push(project_realm(
        &["--scenario", "project", "--seed", "32", "--topics", "4", "--leaver-topic", "2", "--leaver-quarter", "6", "--successor"],
        4,
        32,
        Windowing::Quarterly,
    ));
    realms.push(project_realm(&["--scenario", "project", "--seed", "33", "--years", "6", "--generalists", "0"], 2, 33, Windowing::Yearly));
    realms
}

fn all_windows(realm: &ConceptRealm) -> Vec<Window> {
    let mut w = realm.windows_of(Windowing::Yearly);
    w.extend(realm.windows_of(Windowing::Quarterly));
    w.push(Window::all());
    w
}

fn c1_conservation(realms: &[ConceptRealm]) -> Check {
    let (mut weights, mut vectors) = (0usize, 0usize);
    for realm in realms {
        let k = realm.k as f64;
        for (id, w) in realm
            .issues
            .iter()
            .map(|(id, i)| (id, &i.weights))
            .chain(realm.comments.iter().map(|(id, c)| (id, &c.weights)))
        {
            let s: f64 = w.iter().sum();
            ensure((s - 1.0).abs() <= 1e-9, || format!("{}/{id}: weights sum to {s}", realm.project_key))?;
            weights += 1;
        }
        for window in all_windows(realm) {
            let mut freqs: Vec<_> = developer_frequencies(realm, window).into_values().collect();
            freqs.extend(issue_frequency(realm, window));
            for f in freqs {
                let s: f64 = f.values.iter().sum();
                ensure((s - k).abs() <= 1e-9, || format!("{} {window}: frequencies sum to {s}, K={k}", realm.project_key))?;
                vectors += 1;
            }
        }
    }
    ensure(weights > 0 && vectors > 0, || "nothing checked".into())?;
    Ok(format!("{} realms, {weights} weight vectors, {vectors} frequency vectors", realms.len()))
}

fn c2_additivity(realms: &[ConceptRealm]) -> Check {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for realm in realms {
        for window in all_windows(realm) {
            let team = absolute_frequency(realm, &Scope::Team, window).values;
            let per_dev = developer_acf(realm, window);
            for (c, total) in team.iter().enumerate() {
                let sum: f64 = per_dev.values().map(|v| v[c]).sum();
                worst = worst.max((sum - total).abs());
                checked += 1;
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("{checked} concept/window pairs, max deviation {worst:.1e}"))
}

fn c3_recovery() -> Check {
    let mut scores = Vec::new();
    for seed in 1..=10u64 {
        let (docs, vocab, truth) = planted_corpus(seed);
        let model = train_lda(&docs, &vocab, &TrainConfig::new(3, seed)).map_err(|e| e.to_string())?;
        scores.push(matched_cosine(model.phi(), &truth));
    }
    let passing = scores.iter().filter(|&&s| s >= 0.9).count();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(passing >= 8, || format!("{passing}/10 seeds reach 0.9, scores {scores:.3?}"))?;
    Ok(format!("{passing}/10 seeds with matched cosine >= 0.9 (min {min:.4})"))
}

fn c4_select_k() -> Check {
    let mut chosen = Vec::new();
    for seed in 1..=10u64 {
        let (docs, vocab, _) = planted_corpus(seed);
        let r = select_k(&docs, &vocab, &SweepConfig::new(1, 8, seed)).map_err(|e| e.to_string())?;
        chosen.push(r.chosen_k);
    }
    let hits = chosen.iter().filter(|&&k| k == 3).count();
    ensure(hits >= 8, || format!("K=3 chosen in {hits}/10 seeds: {chosen:?}"))?;
    Ok(format!("K=3 chosen in {hits}/10 seeds {chosen:?}"))
}

fn c5_keepers() -> Check {
    let mut out = Vec::new();
    for (shares, expected) in [("0.6,0.2,0.1,0.1", 1usize), ("0.25,0.25,0.25,0.25", 2)] {
        let (bytes, truth) = synth(&["--scenario", "keepers", "--seed", "0", "--shares", shares]);
        let realm = ConceptRealm::from_jsonl(std::str::from_utf8(&bytes).unwrap()).map_err(|e| e.to_string())?;
        let year = truth["year"].as_i64().unwrap() as i32;
        let counts: Vec<usize> = [0.3, 0.5, 0.7]
            .iter()
            .map(|&t| count_keepers(&realm, year, t).unwrap().expect("realm has issues").count)
            .collect();
        ensure(counts[1] == expected, || format!("[{shares}] keepers at 0.5: {} (expected {expected})", counts[1]))?;
        ensure(counts.windows(2).all(|w| w[0] <= w[1]), || format!("[{shares}] not monotone: {counts:?}"))?;
        out.push(format!("[{shares}] -> {counts:?}"));
    }
    Ok(format!("counts at thresholds 0.3/0.5/0.7: {}", out.join(", ")))
}

/// The leaver rule evaluated literally at quarter `t`.
fn rule_holds(counts: &[u32], t: usize, ratio: f64) -> bool {
    if t < 4 || t + 4 > counts.len() {
        return false;
    }
    let trailing = (t - 4..t).map(|q| f64::from(counts[q])).sum::<f64>() / 4.0;
    trailing > 0.0 && (t..t + 4).all(|q| f64::from(counts[q]) < ratio * trailing)
}

fn c6_leavers() -> Check {
    let (_, truth) = synth(&["--scenario", "traces", "--seed", "6"]);
    let traces: Vec<ActivityTrace> = serde_json::from_value(truth["traces"].clone()).unwrap();
    ensure(traces.len() == 100, || format!("{} traces", traces.len()))?;
    let (mut tp, mut fp, mut fneg, mut planted_hits) = (0usize, 0usize, 0usize, 0usize);
    for trace in &traces {
        let expected = (0..trace.counts.len()).find(|&t| rule_holds(&trace.counts, t, DEFAULT_LEAVER_RATIO));
        let detected = detect_departure(&trace.counts, DEFAULT_LEAVER_RATIO).map(|(t, _)| t);
        match (detected, expected) {
            (Some(d), Some(e)) if d == e => tp += 1,
            (Some(_), Some(_)) => {
                fp += 1;
                fneg += 1;
            }
            (Some(_), None) => fp += 1,
            (None, Some(_)) => fneg += 1,
            (None, None) => {}
        }
        planted_hits += usize::from(detected == trace.planted);
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    let recall = tp as f64 / (tp + fneg).max(1) as f64;
    ensure(precision == 1.0 && recall == 1.0 && tp > 0, || format!("precision {precision}, recall {recall}, tp {tp}"))?;
    Ok(format!("precision {precision}, recall {recall} over {tp} departures; planted quarter matched in {planted_hits}/100"))
}

fn turnover_run() -> Result<(TurnoverImpact, usize), String> {
    let (bytes, truth) = synth(&["--scenario", "project", "--seed", "8", "--leaver-topic", "1", "--leaver-quarter", "8"]);
    let (key, prepared) = prepared_from_export(&bytes);
    let (docs, vocab) = vectorized(&prepared, 5);
    let model = train_lda(&docs, &vocab, &TrainConfig::new(3, 8)).map_err(|e| e.to_string())?;
    let (realm, _) = build_realm(&key, &docs, &model, Windowing::Yearly, DEFAULT_FOLD_IN_ITERATIONS).unwrap();
    let leavers = detect_leavers(&realm, DEFAULT_LEAVER_RATIO);
    ensure(leavers.len() == 1, || format!("expected one leaver, got {leavers:?}"))?;
    let leaver = &leavers[0];
    let planted = &truth["leaver"];
    ensure(
        planted["developer"] == leaver.developer.as_str() && planted["departure_quarter"] == leaver.departure_label().as_str(),
        || format!("detected {leaver:?}, planted {planted}"),
    )?;
    let parsed = parse_export_str(std::str::from_utf8(&bytes).unwrap());
    let topic = planted["topic"].as_u64();
    let owned: Vec<_> = parsed
        .comments
        .iter()
        .filter(|c| leaver.pre_window().contains(c.created_at) && truth["issue_topics"][&c.issue_id].as_u64() == topic)
        .collect();
    ensure(!owned.is_empty() && owned.iter().all(|c| c.author == leaver.developer), || {
        "leaver does not own every pre-window comment of the planted topic".into()
    })?;
    let impact = turnover_impact(&realm, leaver).map_err(|e| e.to_string())?;
    Ok((impact, owned.len()))
}

fn c7_turnover() -> Check {
    let (first, owned) = turnover_run()?;
    let (second, _) = turnover_run()?;
    ensure(first == second, || "impact differs between identical runs".into())?;
    ensure(first.diff_strongest < first.median_diff, || format!("{first:?}"))?;
    Ok(format!(
        "leaver wrote all {owned} pre-window comments of the planted topic; concept {} diff {:.3} < median {:.3}",
        first.strongest_concept, first.diff_strongest, first.median_diff
    ))
}

fn c8_unit_oracles() -> Check {
    let set = |items: &[&'static str]| items.iter().copied().collect::<BTreeSet<_>>();
    ensure(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])) == 0.5, || "jaccard".into())?;
    let stats = |w: &[&[u32]]| WindowStats::build(w.iter().copied(), 100, None);
    let perfect = npmi(1, 2, &stats(&[&[1, 2], &[1, 2], &[3], &[3]])).map_err(|e| e.to_string())?;
    let independent = npmi(1, 2, &stats(&[&[1, 2], &[1], &[2], &[3]])).map_err(|e| e.to_string())?;
    let never = npmi(1, 2, &stats(&[&[1], &[2]])).map_err(|e| e.to_string())?;
    ensure((perfect, independent, never) == (1.0, 0.0, -1.0), || format!("npmi {perfect} {independent} {never}"))?;
    let equal = normalized_entropy(&[0.2; 5], 5).unwrap();
    ensure((equal - 1.0).abs() <= 1e-12, || format!("equal-share entropy {equal}"))?;
    let two = normalized_entropy(&[1.0, 1.0, 0.0, 0.0, 0.0], 5).unwrap();
    let want = 2f64.ln() / 5f64.ln();
    ensure((two - want).abs() <= 1e-12, || format!("two-share entropy {two}"))?;
    let mrr = mean_reciprocal_rank_of(&[Some(1), Some(2), Some(4)]).unwrap();
    ensure(mrr == 7.0 / 12.0, || format!("mrr {mrr}"))?;
    // scipy.stats.ttest_rel([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    let reference = 0.013235599563682695;
    let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).map_err(|e| e.to_string())?;
    ensure((t.p_value - reference).abs() <= 1e-3, || format!("p {}", t.p_value))?;
    Ok(format!("npmi 1/0/-1, entropy {equal} and {two:.6}, mrr {mrr:.6}, p {:.6} (reference {reference:.6})", t.p_value))
}

fn run_pipeline(data: &Path, out: &Path, jobs: Option<&str>) -> Result<Vec<u8>, String> {
    let mut cmd = Process::new(env!("CARGO_BIN_EXE_concept-realm"));
    if let Some(j) = jobs {
        cmd.args(["--jobs", j]);
    }
    cmd.arg("pipeline").arg("--config").arg(data.join("config.toml")).arg("--out").arg(out);
    let status = cmd.output().map_err(|e| e.to_string())?;
    ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    fs::read(out.join("manifest.json")).map_err(|e| e.to_string())
}

fn c9_determinism(scratch: &Path) -> Check {
    let data = mini_dir();
    let first = run_pipeline(&data, &scratch.join("run1"), None)?;
    let second = run_pipeline(&data, &scratch.join("run2"), None)?;
    let one = run_pipeline(&data, &scratch.join("jobs1"), Some("1"))?;
    let eight = run_pipeline(&data, &scratch.join("jobs8"), Some("8"))?;
    ensure(first == second, || "manifests differ between identical runs".into())?;
    ensure(one == eight, || "manifests differ between --jobs 1 and --jobs 8".into())?;
    ensure(first == one, || "manifests depend on --jobs".into())?;
    let manifest: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let n = manifest["files"].as_array().map_or(0, Vec::len);
    Ok(format!("4 runs, identical manifests over {n} files"))
}

fn c10_alignment() -> Check {
    let (bytes, truth) = synth(&["--scenario", "project", "--seed", "21"]);
    let owner = truth["owners"][1].as_str().unwrap().to_owned();
    let (key, prepared) = prepared_from_export(&bytes);
    let topic_one: Vec<&PreparedDoc> = prepared
        .iter()
        .filter(|d| truth["issue_topics"][&d.doc_id].as_u64() == Some(1))
        .collect();
    ensure(
        !topic_one.is_empty() && topic_one.iter().all(|d| d.author_or_assignee.as_deref() == Some(owner.as_str())),
        || "topic-1 issues are not handled exclusively by one developer".into(),
    )?;
    let year = default_alignment_year(&prepared, 10).ok_or("no alignment year")?;
    let mut cfg = AlignmentConfig::new(year, TrainConfig::new(3, 21));
    cfg.vocabulary.no_below = 5;
    let r = evaluate_alignment(&key, &prepared, &cfg).map_err(|e| e.to_string())?;
    ensure(r.accuracy == 1.0 && r.mean_diff > 0.0 && r.p_value < 0.05, || format!("{r:?}"))?;
    Ok(format!(
        "year {year}: accuracy {}, mean diff {:.4}, p {:.2e} over {} issues",
        r.accuracy, r.mean_diff, r.p_value, r.n_test_issues
    ))
}

struct Report {
    failed: usize,
}

impl Report {
    fn run(&mut self, id: &str, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let timing = match limit {
            Some(l) => format!("{:.2}s, limit {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err("time limit exceeded".to_owned()),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {id} {name} ({timing}): {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {id} {name} ({timing}): {detail}");
            }
        }
    }
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let mut report = Report { failed: 0 };
    let mut realms = Vec::new();
    report.run("C1", "weight conservation", Some(Duration::from_secs(10)), || {
        realms = test_realms(scratch.path());
        c1_conservation(&realms)
    });
    report.run("C2", "acf additivity", None, || c2_additivity(&realms));
    report.run("C3", "planted-topic recovery", Some(Duration::from_secs(60)), c3_recovery);
    report.run("C4", "K-selection oracle", None, c4_select_k);
    report.run("C5", "keeper oracle", None, c5_keepers);
    report.run("C6", "leaver detector oracle", None, c6_leavers);
    report.run("C7", "turnover direction", None, c7_turnover);
    report.run("C8", "metric unit oracles", None, c8_unit_oracles);
    report.run("C9", "determinism", None, || c9_determinism(scratch.path()));
    report.run("C10", "alignment sanity", Some(Duration::from_secs(30)), c10_alignment);
    println!("{} of 10 criteria passed", 10 - report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
