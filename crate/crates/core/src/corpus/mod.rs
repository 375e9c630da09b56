//! Issue-tracker records, text preprocessing and vectorization.

mod export;
mod porter;
mod text;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use export::{export_to_string, parse_export, parse_export_str, ExportFormat, LineError, ParsedExport};
pub use porter::porter_stem;
pub use text::{lemmatize, remove_stopwords, tokenize, AliasMap, LemmaTable, Preprocessor, StopwordSet};
pub use vocab::{
    build_vocabulary, tfidf_pseudocounts, to_bow, to_tfidf, vectorize, CorpusStats, Vocabulary,
    VocabularyBuild, VocabularyOptions,
};

pub type DeveloperId = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawIssue {
    pub project_key: String,
    pub issue_id: String,
    pub title: String,
    pub description: String,
    pub created_at: DateTime<Utc>,
    pub assignee: Option<DeveloperId>,
    pub reporter: Option<DeveloperId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawComment {
    pub project_key: String,
    pub issue_id: String,
    pub comment_id: String,
    pub author: DeveloperId,
    pub body: String,
    pub created_at: DateTime<Utc>,
}

/// All issues and comments of one project, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectCorpus {
    pub project_key: String,
    pub issues: Vec<RawIssue>,
    pub comments: Vec<RawComment>,
}

impl ProjectCorpus {
    /// Distinct developers appearing as comment authors or issue assignees.
    pub fn developers(&self) -> BTreeSet<&str> {
        self.comments
            .iter()
            .map(|c| c.author.as_str())
            .chain(self.issues.iter().filter_map(|i| i.assignee.as_deref()))
            .collect()
    }
}

/// Splits flat record lists into per-project corpora, ordered by project key.
pub fn group_by_project(issues: Vec<RawIssue>, comments: Vec<RawComment>) -> Vec<ProjectCorpus> {
    let mut projects: BTreeMap<String, ProjectCorpus> = BTreeMap::new();
    for issue in issues {
        projects
            .entry(issue.project_key.clone())
            .or_insert_with(|| ProjectCorpus {
                project_key: issue.project_key.clone(),
                ..Default::default()
            })
            .issues
            .push(issue);
    }
    for comment in comments {
        projects
            .entry(comment.project_key.clone())
            .or_insert_with(|| ProjectCorpus {
                project_key: comment.project_key.clone(),
                ..Default::default()
            })
            .comments
            .push(comment);
    }
    projects.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Issue,
    Comment,
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocKind::Issue => "issue",
            DocKind::Comment => "comment",
        })
    }
}

/// A preprocessed document whose terms are not yet mapped onto a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedDoc {
    pub doc_id: String,
    pub kind: DocKind,
    /// Assignee for issues, author for comments.
    pub author_or_assignee: Option<DeveloperId>,
    pub timestamp: DateTime<Utc>,
    pub terms: Vec<String>,
}

/// A document vectorized over a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub kind: DocKind,
    pub author_or_assignee: Option<DeveloperId>,
    pub timestamp: DateTime<Utc>,
    /// In-vocabulary term indices in text order.
    pub tokens: Vec<usize>,
    pub counts: BTreeMap<usize, u32>,
}

impl Document {
    /// Builds a document from its token stream, deriving the counts.
    pub fn from_tokens(
        doc_id: impl Into<String>,
        kind: DocKind,
        author_or_assignee: Option<DeveloperId>,
        timestamp: DateTime<Utc>,
        tokens: Vec<usize>,
    ) -> Self {
        let mut counts = BTreeMap::new();
        for &t in &tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        Document {
            doc_id: doc_id.into(),
            kind,
            author_or_assignee,
            timestamp,
            tokens,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
