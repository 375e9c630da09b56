use std::collections::BTreeMap;

use chrono::Datelike;
use serde::Serialize;

use super::distribution::rank_developers;
use super::stats::{argmax, mean, paired_t_test};
use crate::corpus::{tfidf_pseudocounts, vectorize, CorpusStats, DocKind, PreparedDoc, VocabularyOptions};
use crate::realm::{build_realm, developer_frequencies, Window, Windowing, DEFAULT_FOLD_IN_ITERATIONS};
use crate::topicmodel::{infer_document, train_lda, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub project_key: String,
    pub year: i32,
    pub n_test_issues: usize,
    pub active_developer: String,
    pub mean_assignee_score: f64,
    pub mean_active_score: f64,
    pub mean_diff: f64,
    pub accuracy: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub degenerate_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentConfig {
    pub year: i32,
    /// Minimum issues required in each half-year.
    pub min_issues_per_half: usize,
    /// An issue is a hit when its assignee ranks within the top `top_n`.
    pub top_n: usize,
    pub train: TrainConfig,
    pub vocabulary: VocabularyOptions,
    pub tfidf_pseudocounts: bool,
    pub fold_in_iterations: usize,
}

impl AlignmentConfig {
    pub fn new(year: i32, train: TrainConfig) -> Self {
        AlignmentConfig {
            year,
            min_issues_per_half: 10,
            top_n: 1,
            train,
            vocabulary: VocabularyOptions::default(),
            tfidf_pseudocounts: false,
            fold_in_iterations: DEFAULT_FOLD_IN_ITERATIONS,
        }
    }
}

fn halves(year: i32) -> (Window, Window) {
    let start = i64::from(year) * 4;
    (Window::quarters(start, 2), Window::quarters(start + 2, 2))
}

/// The year with the most issues among those meeting the per-half floor,
/// earliest on ties.
pub fn default_alignment_year(docs: &[PreparedDoc], min_issues_per_half: usize) -> Option<i32> {
    let mut per_year: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for d in docs.iter().filter(|d| d.kind == DocKind::Issue) {
        let e = per_year.entry(d.timestamp.year()).or_default();
        if d.timestamp.month() <= 6 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    per_year
        .into_iter()
        .filter(|(_, (a, b))| *a >= min_issues_per_half && *b >= min_issues_per_half)
        .fold(None, |best: Option<(i32, usize)>, (y, (a, b))| match best {
            Some((_, n)) if n >= a + b => best,
            _ => Some((y, a + b)),
        })
        .map(|(y, _)| y)
}

/// Trains on the first half of the year and checks whether second-half
/// issues went to developers whose first-half comments match the issue's
/// strongest concept.
pub fn evaluate_alignment(project_key: &str, docs: &[PreparedDoc], cfg: &AlignmentConfig) -> Result<AlignmentResult> {
    let (h1, h2) = halves(cfg.year);
    let train_docs: Vec<PreparedDoc> = docs.iter().filter(|d| h1.contains(d.timestamp)).cloned().collect();
    let test_issues: Vec<&PreparedDoc> = docs
        .iter()
        .filter(|d| d.kind == DocKind::Issue && h2.contains(d.timestamp))
        .collect();
    let h1_issues = train_docs.iter().filter(|d| d.kind == DocKind::Issue).count();
    if h1_issues < cfg.min_issues_per_half || test_issues.len() < cfg.min_issues_per_half {
        return Err(Error::NotAnalyzable(format!(
            "{project_key} {}: {h1_issues} and {} issues per half, need {}",
            cfg.year,
            test_issues.len(),
            cfg.min_issues_per_half
        )));
    }

    let vocab = cfg.vocabulary.build(&train_docs)?.vocabulary;
    let mut vectorized: Vec<_> = train_docs.iter().map(|d| vectorize(d, &vocab)).collect();
    if cfg.tfidf_pseudocounts {
        let stats = CorpusStats::from_documents(&vectorized, vocab.len());
        vectorized = tfidf_pseudocounts(&vectorized, &stats);
    }
    let model = train_lda(&vectorized, &vocab, &cfg.train)?;
    let (realm, _) = build_realm(project_key, &vectorized, &model, Windowing::Yearly, cfg.fold_in_iterations)?;
    let freqs = developer_frequencies(&realm, h1);
    let active = realm
        .comment_counts(h1)
        .into_iter()
        .fold(None, |best: Option<(&str, usize)>, (d, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((d, n)),
        })
        .map(|(d, _)| d.to_owned())
        .ok_or_else(|| Error::NotAnalyzable(format!("{project_key} {}: no comments in the first half", cfg.year)))?;

    let score = |dev: &str, concept: usize| freqs.get(dev).map_or(0.0, |f| f.values[concept]);
    let mut rankings: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let (mut assignee_scores, mut active_scores, mut hits) = (Vec::new(), Vec::new(), 0usize);
    for issue in test_issues {
        let Some(assignee) = issue.author_or_assignee.as_deref() else {
            continue;
        };
        let doc = vectorize(issue, &vocab);
        let weights = infer_document(&model, &doc, cfg.fold_in_iterations, cfg.train.seed)?.weights;
        let concept = argmax(&weights).expect("K >= 1");
        let ranked = rankings
            .entry(concept)
            .or_insert_with(|| rank_developers(&realm, concept, h1).into_iter().map(|(d, _)| d).collect());
        if ranked.iter().take(cfg.top_n).any(|d| d == assignee) {
            hits += 1;
        }
        assignee_scores.push(score(assignee, concept));
        active_scores.push(score(&active, concept));
    }
    if assignee_scores.len() < 2 {
        return Err(Error::NotAnalyzable(format!(
            "{project_key} {}: fewer than two assigned test issues",
            cfg.year
        )));
    }
    let test = paired_t_test(&assignee_scores, &active_scores)?;
    let mean_assignee_score = mean(&assignee_scores).expect("non-empty");
    let mean_active_score = mean(&active_scores).expect("non-empty");
    Ok(AlignmentResult {
        project_key: project_key.to_owned(),
        year: cfg.year,
        n_test_issues: assignee_scores.len(),
        active_developer: active,
        mean_assignee_score,
        mean_active_score,
        mean_diff: mean_assignee_score - mean_active_score,
        accuracy: hits as f64 / assignee_scores.len() as f64,
        t_statistic: test.t,
        degrees_of_freedom: test.df,
        p_value: test.p_value,
        degenerate_variance: test.degenerate_variance,
    })
}
