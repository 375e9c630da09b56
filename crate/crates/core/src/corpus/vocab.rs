use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{DocKind, Document, PreparedDoc};
use crate::{Error, Result};

/// Retained terms, sorted, with their document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<u32>,
    n_documents: usize,
    no_below: usize,
    no_above: f64,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    no_below: usize,
    no_above: f64,
    n_documents: usize,
    terms: Vec<String>,
    document_frequency: Vec<u32>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.document_frequency, r.n_documents, r.no_below, r.no_above)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            no_below: v.no_below,
            no_above: v.no_above,
            n_documents: v.n_documents,
            terms: v.terms,
            document_frequency: v.document_frequency,
        }
    }
}

impl Vocabulary {
    pub(crate) fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<u32>,
        n_documents: usize,
        no_below: usize,
        no_above: f64,
    ) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            document_frequency,
            n_documents,
            no_below,
            no_above,
            index,
        }
    }

    /// An unfiltered vocabulary over the given terms (document frequencies
    /// unknown). Useful for synthetic corpora and fixtures.
    pub fn from_terms<I: IntoIterator<Item = S>, S: Into<String>>(terms: I) -> Self {
        let terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        let n = terms.len();
        Self::from_parts(terms, vec![0; n], 0, 0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, idx: usize) -> Option<&str> {
        self.terms.get(idx).map(String::as_str)
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self) -> &[u32] {
        &self.document_frequency
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn no_below(&self) -> usize {
        self.no_below
    }

    pub fn no_above(&self) -> f64 {
        self.no_above
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabularyBuild {
    pub vocabulary: Vocabulary,
    /// Distinct terms seen in the input but filtered out.
    pub discarded: usize,
}

/// Keeps terms with `no_below <= df <= no_above * N`.
///
/// An empty result means the project cannot be analyzed and is reported as
/// [`Error::NotAnalyzable`].
pub fn build_vocabulary<I, D>(documents: I, no_below: usize, no_above: f64) -> Result<VocabularyBuild>
where
    I: IntoIterator<Item = D>,
    D: AsRef<[String]>,
{
    if !(no_above > 0.0 && no_above <= 1.0) {
        return Err(Error::invalid(format!("no_above must be in (0, 1], got {no_above}")));
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    let mut n_documents = 0usize;
    for doc in documents {
        n_documents += 1;
        let distinct: BTreeSet<&String> = doc.as_ref().iter().collect();
        for term in distinct {
            *df.entry(term.clone()).or_insert(0) += 1;
        }
    }
    let ceiling = no_above * n_documents as f64;
    let total = df.len();
    let (terms, freqs): (Vec<String>, Vec<u32>) = df
        .into_iter()
        .filter(|&(_, f)| f as usize >= no_below && f as f64 <= ceiling)
        .unzip();
    if terms.is_empty() {
        return Err(Error::NotAnalyzable(format!(
            "no term survives vocabulary filtering (no_below={no_below}, no_above={no_above}, {n_documents} documents)"
        )));
    }
    let discarded = total - terms.len();
    Ok(VocabularyBuild {
        vocabulary: Vocabulary::from_parts(terms, freqs, n_documents, no_below, no_above),
        discarded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabularyOptions {
    pub no_below: usize,
    pub no_above: f64,
    /// Count document frequency over issues only instead of issues and
    /// comments pooled.
    pub issues_only: bool,
}

impl Default for VocabularyOptions {
    fn default() -> Self {
        VocabularyOptions {
            no_below: 15,
            no_above: 0.5,
            issues_only: false,
        }
    }
}

impl VocabularyOptions {
    pub fn build(&self, docs: &[PreparedDoc]) -> Result<VocabularyBuild> {
        let selected = docs
            .iter()
            .filter(|d| !self.issues_only || d.kind == DocKind::Issue)
            .map(|d| d.terms.as_slice());
        build_vocabulary(selected, self.no_below, self.no_above)
    }
}

/// Bag of words; out-of-vocabulary tokens are dropped.
pub fn to_bow<S: AsRef<str>>(tokens: &[S], vocabulary: &Vocabulary) -> BTreeMap<usize, u32> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocabulary.index_of(t.as_ref()) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    counts
}

/// Maps a prepared document onto the vocabulary.
pub fn vectorize(doc: &PreparedDoc, vocabulary: &Vocabulary) -> Document {
    let tokens = doc.terms.iter().filter_map(|t| vocabulary.index_of(t)).collect();
    Document::from_tokens(
        doc.doc_id.clone(),
        doc.kind,
        doc.author_or_assignee.clone(),
        doc.timestamp,
        tokens,
    )
}

/// Document frequencies over a vectorized corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_documents: usize,
    pub document_frequency: Vec<u32>,
}

impl CorpusStats {
    pub fn from_documents(documents: &[Document], vocab_size: usize) -> Self {
        let mut df = vec![0u32; vocab_size];
        for doc in documents {
            for &t in doc.counts.keys() {
                df[t] += 1;
            }
        }
        CorpusStats {
            n_documents: documents.len(),
            document_frequency: df,
        }
    }
}

/// `tf(t, d) * ln(N / df(t))` for every term of the document.
pub fn to_tfidf(document: &Document, stats: &CorpusStats) -> BTreeMap<usize, f64> {
    let n = stats.n_documents as f64;
    document
        .counts
        .iter()
        .map(|(&t, &tf)| {
            let df = stats.document_frequency.get(t).copied().unwrap_or(0).max(1) as f64;
            (t, f64::from(tf) * (n / df).ln().max(0.0))
        })
        .collect()
}

/// Replaces raw counts with TF-IDF weights rounded to the nearest integer,
/// keeping every present term at least once.
pub fn tfidf_pseudocounts(documents: &[Document], stats: &CorpusStats) -> Vec<Document> {
    documents
        .iter()
        .map(|doc| {
            let tokens = to_tfidf(doc, stats)
                .into_iter()
                .flat_map(|(t, w)| std::iter::repeat_n(t, (w.round() as usize).max(1)))
                .collect();
            Document::from_tokens(doc.doc_id.clone(), doc.kind, doc.author_or_assignee.clone(), doc.timestamp, tokens)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn docs_with_term(n_docs: usize, n_with: usize) -> Vec<Vec<String>> {
        (0..n_docs)
            .map(|i| {
                let mut d = vec!["filler".to_string()];
                if i < n_with {
                    d.push("term".into());
                }
                d
            })
            .collect()
    }

    fn has_term(build: &Result<VocabularyBuild>) -> bool {
        build.as_ref().map(|b| b.vocabulary.index_of("term").is_some()).unwrap_or(false)
    }

    #[test]
    fn too_frequent_term_is_excluded() {
        // 16 of 20 documents: 0.8 > 0.5
        assert!(!has_term(&build_vocabulary(docs_with_term(20, 16), 15, 0.5)));
    }

    #[test]
    fn term_within_both_bounds_is_kept() {
        // 16 >= 15 and 16 / 40 = 0.4 <= 0.5
        let mut docs = docs_with_term(40, 16);
        docs.iter_mut().skip(20).for_each(|d| d[0] = "other".into());
        let build = build_vocabulary(docs, 15, 0.5);
        assert!(has_term(&build));
    }

    #[test]
    fn rare_term_is_excluded() {
        let mut docs = docs_with_term(40, 3);
        docs.iter_mut().skip(20).for_each(|d| d[0] = "other".into());
        let build = build_vocabulary(docs, 15, 0.5).unwrap();
        assert_eq!(build.vocabulary.terms(), ["filler", "other"]);
        assert_eq!(build.discarded, 1);
    }

    #[test]
    fn empty_vocabulary_is_not_analyzable() {
        let err = build_vocabulary(docs_with_term(5, 1), 15, 0.5).unwrap_err();
        assert!(matches!(err, Error::NotAnalyzable(_)));
        assert!(build_vocabulary(docs_with_term(5, 1), 1, 0.0).is_err());
    }

    #[test]
    fn bow_examples() {
        let vocab = Vocabulary::from_terms(["bug", "fix"]);
        assert_eq!(to_bow(&["bug", "bug", "fix"], &vocab), BTreeMap::from([(0, 2), (1, 1)]));
        assert!(to_bow(&["nope"], &vocab).is_empty());
        assert!(to_bow::<&str>(&[], &vocab).is_empty());
    }

    fn doc(tokens: Vec<usize>) -> Document {
        let ts = Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap();
        Document::from_tokens("d", DocKind::Issue, None, ts, tokens)
    }

    #[test]
    fn tfidf_examples() {
        let stats = CorpusStats {
            n_documents: 100,
            document_frequency: vec![10, 100],
        };
        let w = to_tfidf(&doc(vec![0, 0, 1]), &stats);
        assert!((w[&0] - 4.605_170_185_988_092).abs() < 1e-12);
        assert_eq!(w[&1], 0.0);
        assert!(to_tfidf(&doc(vec![]), &stats).is_empty());
    }

    #[test]
    fn pseudocounts_keep_present_terms() {
        let stats = CorpusStats {
            n_documents: 100,
            document_frequency: vec![10, 100],
        };
        let out = tfidf_pseudocounts(&[doc(vec![0, 0, 1])], &stats);
        assert_eq!(out[0].counts, BTreeMap::from([(0, 5), (1, 1)]));
    }

    #[test]
    fn vocabulary_serde_rebuilds_index() {
        let build = build_vocabulary(vec![vec!["a".to_string(), "b".into()], vec!["b".into()]], 1, 1.0).unwrap();
        let json = serde_json::to_string(&build.vocabulary).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, build.vocabulary);
        assert_eq!(back.index_of("b"), Some(1));
        assert_eq!(back.document_frequency(), [1, 2]);
    }
}
