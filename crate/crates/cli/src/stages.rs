//! The pipeline stages. Each reads the previous stage's files from the
//! output directory, so stages can run one at a time or chained.
//!
//! ```text
//! out/
//!   ingest_errors.csv
//!   <project>/documents.jsonl    ingest
//!   <project>/vocabulary.json    ingest
//!   <project>/select_k.csv       select-k
//!   <project>/model.json         train (plus model.bin)
//!   <project>/realm.jsonl        realm (plus rejected.csv)
//!   <project>/<analysis>.csv     analyze
//!   summary.csv, brackets.csv    report
//!   plots/*.csv                  report
//!   manifest.json                report
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use concept_realm::analytics::{
    analyze_realm, apply_split, default_alignment_year, evaluate_alignment, AlignmentConfig, ProjectAnalytics,
};
use concept_realm::corpus::{
    group_by_project, parse_export, tfidf_pseudocounts, vectorize, AliasMap, CorpusStats, DocKind, Document,
    ExportFormat, LemmaTable, PreparedDoc, Preprocessor, StopwordSet, Vocabulary,
};
use concept_realm::modelselect::{select_k as sweep_k, KRecord, KSelectionResult, SweepConfig};
use concept_realm::realm::{build_realm, ConceptRealm};
use concept_realm::report::{
    path_component, project_artifacts, select_k_table, summarize, summary_artifacts, write_artifacts,
    write_atomic, write_reports, Artifact, Manifest, ProjectStats, Table,
};
use concept_realm::topicmodel::{train_lda, write_binary, LdaModel};
use concept_realm::{Error, Result, FORMAT_VERSION};

use crate::config::RunConfig;

const DOCUMENTS: &str = "documents.jsonl";
const VOCABULARY: &str = "vocabulary.json";
const SELECT_K: &str = "select_k.csv";
const MODEL: &str = "model.json";
const MODEL_BIN: &str = "model.bin";
const REALM: &str = "realm.jsonl";
const REJECTED: &str = "rejected.csv";
const DOCUMENTS_FORMAT: &str = "concept-realm-documents";

#[derive(Serialize, Deserialize)]
struct DocumentsHeader {
    format: String,
    version: u32,
    project: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn documents_jsonl(key: &str, docs: &[PreparedDoc]) -> String {
    let header = DocumentsHeader {
        format: DOCUMENTS_FORMAT.into(),
        version: FORMAT_VERSION,
        project: key.into(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("document serializes"));
        out.push('\n');
    }
    out
}

fn read_documents(path: &Path) -> Result<(String, Vec<PreparedDoc>)> {
    let text = read(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: DocumentsHeader = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{} is empty", path.display())))
        .and_then(|l| serde_json::from_str(l).map_err(|e| Error::json(path.display().to_string(), e)))?;
    if header.format != DOCUMENTS_FORMAT || header.version != FORMAT_VERSION {
        return Err(Error::InvalidInput(format!("{} is not a documents file", path.display())));
    }
    let docs = lines
        .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path.display().to_string(), e)))
        .collect::<Result<_>>()?;
    Ok((header.project, docs))
}

/// A project known to the output directory.
struct Project {
    key: String,
    dir: PathBuf,
    docs: Vec<PreparedDoc>,
}

impl Project {
    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn has(&self, name: &str) -> bool {
        self.file(name).is_file()
    }

    fn vocabulary(&self) -> Result<Vocabulary> {
        let path = self.file(VOCABULARY);
        serde_json::from_str(&read(&path)?).map_err(|e| Error::json(path.display().to_string(), e))
    }

    fn model(&self) -> Result<LdaModel> {
        LdaModel::from_json(&read(&self.file(MODEL))?)
    }

    fn realm(&self) -> Result<ConceptRealm> {
        ConceptRealm::from_jsonl(&read(&self.file(REALM))?)
    }
}

/// Projects ingested into the output directory, in key order.
fn projects(cfg: &RunConfig) -> Result<Vec<Project>> {
    let root = &cfg.output;
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(DOCUMENTS).is_file())
        .collect();
    dirs.sort();
    let mut out: Vec<Project> = dirs
        .into_iter()
        .map(|dir| {
            let (key, docs) = read_documents(&dir.join(DOCUMENTS))?;
            Ok(Project { key, dir, docs })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

fn preprocessor(cfg: &RunConfig) -> Result<Preprocessor> {
    Ok(Preprocessor {
        stopwords: match &cfg.stopwords {
            Some(p) => StopwordSet::load(p)?,
            None => StopwordSet::english(),
        },
        lemmas: match &cfg.lemmas {
            Some(p) => LemmaTable::load(p)?,
            None => LemmaTable::default(),
        },
        aliases: match &cfg.aliases {
            Some(p) => AliasMap::load(p)?,
            None => AliasMap::default(),
        },
    })
}

/// Parses the exports, preprocesses every project and builds vocabularies.
/// Returns the project keys.
pub fn ingest(cfg: &RunConfig) -> Result<Vec<String>> {
    if cfg.input.is_empty() {
        return Err(Error::InvalidInput("no input files given".into()));
    }
    let pre = preprocessor(cfg)?;
    let mut issues = Vec::new();
    let mut comments = Vec::new();
    let mut errors = Table::new(["source", "line", "message"]);
    for path in &cfg.input {
        let parsed = parse_export(path, ExportFormat::Jsonl)?;
        let source = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        for e in &parsed.errors {
            warn!("{source}:{}: {}", e.line, e.message);
            errors.push(vec![source.clone(), e.line.to_string(), e.message.clone()]);
        }
        info!("{source}: {} issues, {} comments", parsed.issues.len(), parsed.comments.len());
        issues.extend(parsed.issues);
        comments.extend(parsed.comments);
    }
    let corpora = group_by_project(issues, comments);
    let options = cfg.vocabulary_options();
    let artifacts: Vec<Vec<Artifact>> = corpora
        .par_iter()
        .map(|corpus| {
            let key = &corpus.project_key;
            let dir = path_component(key);
            let docs = pre.prepare(corpus);
            let mut files = vec![Artifact::new(format!("{dir}/{DOCUMENTS}"), documents_jsonl(key, &docs))];
            match options.build(&docs) {
                Ok(build) => {
                    info!("{key}: {} terms kept, {} discarded", build.vocabulary.len(), build.discarded);
                    let mut json = serde_json::to_string_pretty(&build.vocabulary).expect("vocabulary serializes");
                    json.push('\n');
                    files.push(Artifact::new(format!("{dir}/{VOCABULARY}"), json));
                }
                Err(Error::NotAnalyzable(msg)) => {
                    warn!("{key} is not analyzable: {msg}");
                    let stale = cfg.output.join(&dir).join(VOCABULARY);
                    if stale.exists() {
                        fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                    }
                }
                Err(e) => return Err(e),
            }
            Ok(files)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<Artifact> = artifacts.into_iter().flatten().collect();
    all.push(Artifact::new("ingest_errors.csv", errors.to_csv()?));
    write_artifacts(&cfg.output, &all)?;
    Ok(corpora.into_iter().map(|c| c.project_key).collect())
}

fn training_documents(cfg: &RunConfig, docs: &[PreparedDoc], vocab: &Vocabulary) -> Vec<Document> {
    let selected: Vec<Document> = docs
        .iter()
        .filter(|d| !cfg.vocabulary.issues_only || d.kind == DocKind::Issue)
        .map(|d| vectorize(d, vocab))
        .collect();
    weighted(cfg, selected, vocab)
}

fn weighted(cfg: &RunConfig, docs: Vec<Document>, vocab: &Vocabulary) -> Vec<Document> {
    if cfg.model.tfidf_pseudocounts {
        let stats = CorpusStats::from_documents(&docs, vocab.len());
        tfidf_pseudocounts(&docs, &stats)
    } else {
        docs
    }
}

fn sweep(cfg: &RunConfig) -> SweepConfig {
    SweepConfig {
        train: cfg.train_config(cfg.model.k_min),
        window: cfg.model.coherence_window,
        measure: cfg.model.coherence,
        ..SweepConfig::new(cfg.model.k_min, cfg.model.k_max, cfg.seed())
    }
}

/// Scores the configured K range for every analyzable project.
pub fn select_k(cfg: &RunConfig) -> Result<BTreeMap<String, KSelectionResult>> {
    let projects = projects(cfg)?;
    let results: Vec<Option<(String, KSelectionResult)>> = projects
        .par_iter()
        .filter(|p| p.has(VOCABULARY))
        .map(|p| {
            let vocab = p.vocabulary()?;
            let docs = training_documents(cfg, &p.docs, &vocab);
            match sweep_k(&docs, &vocab, &sweep(cfg)) {
                Ok(r) => {
                    info!("{}: chose K={}", p.key, r.chosen_k);
                    write_atomic(&p.file(SELECT_K), &select_k_table(&r).to_csv()?)?;
                    Ok(Some((p.key.clone(), r)))
                }
                Err(Error::NotAnalyzable(msg)) => {
                    warn!("{}: K selection failed: {msg}", p.key);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Reads a K-selection table back.
pub fn read_select_k(path: &Path) -> Result<KSelectionResult> {
    let bad = |what: &str| Error::InvalidInput(format!("malformed {}: {what}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => bad(&format!("{other:?}")),
    })?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut chosen = None;
    for row in reader.records() {
        let row = row.map_err(|e| bad(&e.to_string()))?;
        let field = |i: usize| row.get(i).ok_or_else(|| bad("missing column"));
        let num = |i: usize| field(i)?.parse::<f64>().map_err(|_| bad("bad number"));
        let k: usize = field(0)?.parse().map_err(|_| bad("bad K"))?;
        if field(1)?.is_empty() {
            failures.push((k, field(5)?.to_owned()));
            continue;
        }
        records.push(KRecord { k, coherence: num(1)?, overlap: num(2)?, score: num(3)? });
        if field(4)? == "true" {
            chosen = Some(k);
        }
    }
    let n = records.len().max(1) as f64;
    Ok(KSelectionResult {
        mean_coherence: records.iter().map(|r| r.coherence).sum::<f64>() / n,
        mean_overlap: records.iter().map(|r| r.overlap).sum::<f64>() / n,
        chosen_k: chosen.ok_or_else(|| bad("no chosen K"))?,
        records,
        failures,
    })
}

/// Trains each project's model at the fixed K, or else at the selected K.
pub fn train(cfg: &RunConfig) -> Result<Vec<String>> {
    let projects = projects(cfg)?;
    let trained: Vec<Option<String>> = projects
        .par_iter()
        .filter(|p| p.has(VOCABULARY))
        .map(|p| {
            let k = match cfg.model.k {
                Some(k) => k,
                None if p.has(SELECT_K) => read_select_k(&p.file(SELECT_K))?.chosen_k,
                None => {
                    warn!("{}: no K given and no K selection found; skipped", p.key);
                    return Ok(None);
                }
            };
            let vocab = p.vocabulary()?;
            let docs = training_documents(cfg, &p.docs, &vocab);
            let model = train_lda(&docs, &vocab, &cfg.train_config(k))?;
            info!("{}: trained K={k}", p.key);
            let mut json = model.to_json();
            json.push('\n');
            write_artifacts(
                &p.dir,
                &[Artifact::new(MODEL, json), Artifact::new(MODEL_BIN, write_binary(&model))],
            )?;
            Ok(Some(p.key.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(trained.into_iter().flatten().collect())
}

/// Builds the concept realm of every trained project.
pub fn realm(cfg: &RunConfig) -> Result<Vec<String>> {
    let projects = projects(cfg)?;
    let built: Vec<String> = projects
        .par_iter()
        .filter(|p| p.has(MODEL) && p.has(VOCABULARY))
        .map(|p| {
            let vocab = p.vocabulary()?;
            let model = p.model()?;
            model.check_vocabulary(&vocab)?;
            let docs = weighted(cfg, p.docs.iter().map(|d| vectorize(d, &vocab)).collect(), &vocab);
            let (realm, rejected) = build_realm(&p.key, &docs, &model, cfg.realm.windowing, cfg.model.fold_in_iterations)?;
            let mut table = Table::new(["doc", "kind", "reason"]);
            for r in &rejected {
                warn!("{}: rejected {} {}: {}", p.key, r.kind, r.doc_id, r.reason);
                table.push(vec![r.doc_id.clone(), r.kind.to_string(), r.reason.clone()]);
            }
            info!("{}: {} issues, {} comments in realm", p.key, realm.issues.len(), realm.comments.len());
            write_artifacts(
                &p.dir,
                &[Artifact::new(REALM, realm.to_jsonl()), Artifact::new(REJECTED, table.to_csv()?)],
            )?;
            Ok(p.key.clone())
        })
        .collect::<Result<_>>()?;
    Ok(built)
}

fn alignment(cfg: &RunConfig, p: &Project, model: &LdaModel) -> Option<concept_realm::analytics::AlignmentResult> {
    let min = cfg.analysis.min_issues_per_half;
    let year = cfg.analysis.alignment_year.or_else(|| default_alignment_year(&p.docs, min))?;
    let acfg = AlignmentConfig {
        top_n: cfg.analysis.top_n,
        min_issues_per_half: min,
        vocabulary: cfg.vocabulary_options(),
        tfidf_pseudocounts: cfg.model.tfidf_pseudocounts,
        fold_in_iterations: cfg.model.fold_in_iterations,
        ..AlignmentConfig::new(year, cfg.train_config(model.k()))
    };
    match evaluate_alignment(&p.key, &p.docs, &acfg) {
        Ok(r) => Some(r),
        Err(e) => {
            info!("{}: alignment not analyzable: {e}", p.key);
            None
        }
    }
}

/// Runs every analysis on every realm. Split labels are assigned across
/// projects.
pub fn compute_analytics(cfg: &RunConfig) -> Result<Vec<ProjectAnalytics>> {
    let projects = projects(cfg)?;
    let acfg = cfg.analytics();
    let mut all: Vec<ProjectAnalytics> = projects
        .par_iter()
        .filter(|p| p.has(REALM) && p.has(MODEL))
        .map(|p| {
            let realm = p.realm()?;
            let model = p.model()?;
            let mut a = analyze_realm(&realm, &acfg)?;
            a.alignment = alignment(cfg, p, &model);
            Ok(a)
        })
        .collect::<Result<_>>()?;
    apply_split(&mut all, cfg.analysis.split_margin);
    Ok(all)
}

/// Computes and writes the per-project analysis CSVs.
pub fn analyze(cfg: &RunConfig) -> Result<Vec<ProjectAnalytics>> {
    let all = compute_analytics(cfg)?;
    let mut artifacts = Vec::new();
    for a in &all {
        artifacts.extend(project_artifacts(a)?);
    }
    write_artifacts(&cfg.output, &artifacts)?;
    Ok(all)
}

/// Writes summaries, plot data and the manifest. Analytics are recomputed
/// when not supplied.
pub fn report(cfg: &RunConfig, analytics: Option<Vec<ProjectAnalytics>>) -> Result<Manifest> {
    let analytics = match analytics {
        Some(a) => a,
        None => compute_analytics(cfg)?,
    };
    let projects = projects(cfg)?;
    let stats: Vec<ProjectStats> = projects.iter().map(|p| ProjectStats::from_prepared(&p.key, &p.docs)).collect();
    let mut chosen = BTreeMap::new();
    let mut selections = BTreeMap::new();
    for p in &projects {
        if p.has(MODEL) {
            chosen.insert(p.key.clone(), p.model()?.k());
        }
        if p.has(SELECT_K) {
            selections.insert(p.key.clone(), read_select_k(&p.file(SELECT_K))?);
        }
    }
    let (summaries, brackets) = summarize(&stats, &chosen, &analytics);
    let artifacts = summary_artifacts(&summaries, &brackets, &analytics, &selections)?;
    let manifest = write_reports(&cfg.output, &artifacts)?;
    info!("manifest lists {} files", manifest.files.len());
    Ok(manifest)
}

pub fn pipeline(cfg: &RunConfig) -> Result<Manifest> {
    ingest(cfg)?;
    select_k(cfg)?;
    train(cfg)?;
    realm(cfg)?;
    let analytics = analyze(cfg)?;
    report(cfg, Some(analytics))
}
