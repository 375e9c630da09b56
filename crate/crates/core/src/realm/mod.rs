//! The concept realm: every issue and comment of a project mapped onto the
//! project's concepts, plus the frequency measures derived from it.
//!
//! Frequencies are scaled by K so that 1.0 always means "average share":
//! the team-level vector averages issue weights, the developer-level vector
//! averages one developer's comment weights, and both sum to K.
//! Absolute concept frequency (acf) is the plain sum of comment weights.

mod persist;
mod window;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use window::{quarter_ordinal, Window, Windowing};

use crate::corpus::{DocKind, Document};
use crate::topicmodel::{infer_document, LdaModel};
use crate::{Error, Result};

pub const DEFAULT_FOLD_IN_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueEntry {
    pub assignee: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentEntry {
    pub developer: String,
    pub timestamp: DateTime<Utc>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptRealm {
    pub project_key: String,
    pub k: usize,
    pub model_hash: String,
    pub windowing: Windowing,
    pub issues: BTreeMap<String, IssueEntry>,
    pub comments: BTreeMap<String, CommentEntry>,
}

fn check_weights(k: usize, id: &str, weights: &[f64]) -> Result<()> {
    if weights.len() != k {
        return Err(Error::invalid(format!("{id}: {} weights for K={k}", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid(format!("{id}: negative or NaN weight")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{id}: weights sum to {sum}")));
    }
    Ok(())
}

impl ConceptRealm {
    pub fn new(project_key: impl Into<String>, k: usize, model_hash: impl Into<String>, windowing: Windowing) -> Self {
        ConceptRealm {
            project_key: project_key.into(),
            k,
            model_hash: model_hash.into(),
            windowing,
            issues: BTreeMap::new(),
            comments: BTreeMap::new(),
        }
    }

    pub fn insert_issue(&mut self, id: impl Into<String>, entry: IssueEntry) -> Result<()> {
        let id = id.into();
        check_weights(self.k, &id, &entry.weights)?;
        self.issues.insert(id, entry);
        Ok(())
    }

    pub fn insert_comment(&mut self, id: impl Into<String>, entry: CommentEntry) -> Result<()> {
        let id = id.into();
        check_weights(self.k, &id, &entry.weights)?;
        self.comments.insert(id, entry);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty() && self.comments.is_empty()
    }

    fn timestamps(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        self.issues
            .values()
            .map(|i| i.timestamp)
            .chain(self.comments.values().map(|c| c.timestamp))
    }

    /// First and last activity.
    pub fn time_range(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let min = self.timestamps().min()?;
        let max = self.timestamps().max()?;
        Some((min, max))
    }

    /// Quarter ordinals of the first and last activity (inclusive).
    pub fn quarter_span(&self) -> Option<(i64, i64)> {
        self.time_range()
            .map(|(a, b)| (quarter_ordinal(a), quarter_ordinal(b)))
    }

    /// Windows of the realm's windowing scheme that hold at least one
    /// document, in time order.
    pub fn windows(&self) -> Vec<Window> {
        self.windows_of(self.windowing)
    }

    pub fn windows_of(&self, windowing: Windowing) -> Vec<Window> {
        let set: BTreeSet<Window> = self.timestamps().map(|t| Window::containing(t, windowing)).collect();
        set.into_iter().collect()
    }

    /// Calendar years holding at least one issue.
    pub fn issue_years(&self) -> Vec<i32> {
        let years: BTreeSet<i32> = self
            .issues
            .values()
            .map(|i| Window::containing(i.timestamp, Windowing::Yearly).year_of_start())
            .collect();
        years.into_iter().collect()
    }

    pub fn issues_in(&self, window: Window) -> impl Iterator<Item = (&String, &IssueEntry)> {
        self.issues.iter().filter(move |(_, i)| window.contains(i.timestamp))
    }

    pub fn comments_in(&self, window: Window) -> impl Iterator<Item = (&String, &CommentEntry)> {
        self.comments.iter().filter(move |(_, c)| window.contains(c.timestamp))
    }

    /// Developers with at least one comment in the window.
    pub fn developers(&self, window: Window) -> BTreeSet<&str> {
        self.comments_in(window).map(|(_, c)| c.developer.as_str()).collect()
    }

    pub fn comment_counts(&self, window: Window) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for (_, c) in self.comments_in(window) {
            *counts.entry(c.developer.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

/// A document left out of the realm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub doc_id: String,
    pub kind: DocKind,
    pub reason: String,
}

/// Infers a weight vector for every document and files it into the realm.
///
/// Comments dated before the project's first issue, and comments without an
/// author, are rejected and reported rather than stored.
pub fn build_realm(
    project_key: &str,
    documents: &[Document],
    model: &LdaModel,
    windowing: Windowing,
    fold_in_iterations: usize,
) -> Result<(ConceptRealm, Vec<Rejection>)> {
    let start = documents
        .iter()
        .filter(|d| d.kind == DocKind::Issue)
        .map(|d| d.timestamp)
        .min();
    let mut rejections = Vec::new();
    let mut accepted = Vec::with_capacity(documents.len());
    for doc in documents {
        let reason = match (doc.kind, &doc.author_or_assignee, start) {
            (DocKind::Comment, None, _) => Some("comment without author".to_owned()),
            (_, _, Some(s)) if doc.timestamp < s => Some(format!("dated {} before project start {s}", doc.timestamp)),
            _ => None,
        };
        match reason {
            Some(reason) => rejections.push(Rejection {
                doc_id: doc.doc_id.clone(),
                kind: doc.kind,
                reason,
            }),
            None => accepted.push(doc),
        }
    }

    let weights: Vec<Vec<f64>> = accepted
        .par_iter()
        .map(|doc| infer_document(model, doc, fold_in_iterations, model.seed()).map(|w| w.weights))
        .collect::<Result<_>>()?;

    let mut realm = ConceptRealm::new(project_key, model.k(), model.content_hash(), windowing);
    for (doc, weights) in accepted.into_iter().zip(weights) {
        match doc.kind {
            DocKind::Issue => realm.insert_issue(
                doc.doc_id.clone(),
                IssueEntry {
                    assignee: doc.author_or_assignee.clone(),
                    timestamp: doc.timestamp,
                    weights,
                },
            )?,
            DocKind::Comment => realm.insert_comment(
                doc.doc_id.clone(),
                CommentEntry {
                    developer: doc.author_or_assignee.clone().expect("checked above"),
                    timestamp: doc.timestamp,
                    weights,
                },
            )?,
        }
    }
    Ok((realm, rejections))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    /// Issue level for scaled frequencies; all comments for acf.
    Team,
    Developer(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub scope: Scope,
    pub window: Window,
    pub values: Vec<f64>,
    /// Documents aggregated.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsoluteFrequency {
    pub scope: Scope,
    pub window: Window,
    pub values: Vec<f64>,
}

fn scaled_mean<'a>(k: usize, weights: impl Iterator<Item = &'a Vec<f64>>) -> Option<(Vec<f64>, usize)> {
    let mut sums = vec![0.0; k];
    let mut n = 0usize;
    for w in weights {
        for (s, x) in sums.iter_mut().zip(w) {
            *s += x;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let scale = k as f64 / n as f64;
    Some((sums.into_iter().map(|s| s * scale).collect(), n))
}

/// Team-level frequency: mean issue weight per concept times K. Absent when
/// the window has no issues.
pub fn issue_frequency(realm: &ConceptRealm, window: Window) -> Option<FrequencyVector> {
    let (values, n) = scaled_mean(realm.k, realm.issues_in(window).map(|(_, i)| &i.weights))?;
    Some(FrequencyVector {
        scope: Scope::Team,
        window,
        values,
        n,
    })
}

/// Developer-level frequency: mean weight of the developer's comments in the
/// window times K. Absent when the developer did not comment.
pub fn developer_frequency(realm: &ConceptRealm, developer: &str, window: Window) -> Option<FrequencyVector> {
    let weights = realm
        .comments_in(window)
        .filter(|(_, c)| c.developer == developer)
        .map(|(_, c)| &c.weights);
    let (values, n) = scaled_mean(realm.k, weights)?;
    Some(FrequencyVector {
        scope: Scope::Developer(developer.to_owned()),
        window,
        values,
        n,
    })
}

/// [`developer_frequency`] for every developer active in the window.
pub fn developer_frequencies(realm: &ConceptRealm, window: Window) -> BTreeMap<String, FrequencyVector> {
    let mut grouped: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (_, c) in realm.comments_in(window) {
        grouped.entry(&c.developer).or_default().push(&c.weights);
    }
    grouped
        .into_iter()
        .map(|(dev, ws)| {
            let (values, n) = scaled_mean(realm.k, ws.into_iter()).expect("non-empty group");
            let fv = FrequencyVector {
                scope: Scope::Developer(dev.to_owned()),
                window,
                values,
                n,
            };
            (dev.to_owned(), fv)
        })
        .collect()
}

/// Sum of comment weights per concept; no averaging, no scaling.
pub fn absolute_frequency(realm: &ConceptRealm, scope: &Scope, window: Window) -> AbsoluteFrequency {
    let mut values = vec![0.0; realm.k];
    for (_, c) in realm.comments_in(window) {
        if let Scope::Developer(d) = scope {
            if &c.developer != d {
                continue;
            }
        }
        for (v, w) in values.iter_mut().zip(&c.weights) {
            *v += w;
        }
    }
    AbsoluteFrequency {
        scope: scope.clone(),
        window,
        values,
    }
}

/// acf per developer active in the window.
pub fn developer_acf(realm: &ConceptRealm, window: Window) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (_, c) in realm.comments_in(window) {
        let acc = out.entry(c.developer.clone()).or_insert_with(|| vec![0.0; realm.k]);
        for (v, w) in acc.iter_mut().zip(&c.weights) {
            *v += w;
        }
    }
    out
}
