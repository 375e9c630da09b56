use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{porter_stem, DocKind, PreparedDoc, ProjectCorpus};
use crate::{Error, Result};

static BUNDLED_STOPWORDS: &str = include_str!("stopwords_en.txt");

static URL_OR_CODE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        ```[\s\S]*?(?:```|\z)                       # markdown fences
        | \{code(?::[^}]*)?\}[\s\S]*?(?:\{code\}|\z) # jira code blocks
        | \{noformat\}[\s\S]*?(?:\{noformat\}|\z)
        | (?i:\b(?:https?|ftp|file)://\S*)
        | (?i:\bwww\.\S*)",
    )
    .expect("valid pattern")
});

fn is_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || (('\u{c0}'..='\u{ff}').contains(&c) && c != '\u{d7}' && c != '\u{f7}')
}

/// Splits text into lowercase runs of letters (ASCII and Latin-1).
///
/// URLs and code blocks are removed first; digits and punctuation separate
/// tokens; tokens shorter than two characters are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned = URL_OR_CODE.replace_all(text, " ");
    cleaned
        .split(|c: char| !is_letter(c))
        .filter(|run| run.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordSet(HashSet<String>);

impl StopwordSet {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One token per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        StopwordSet(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        fs::read_to_string(path).map(|t| Self::parse(&t)).map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopwordSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopwordSet(iter.into_iter().map(Into::into).collect())
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordSet) -> Vec<String> {
    tokens.into_iter().filter(|t| !stopwords.contains(t)).collect()
}

/// Two-column TSV map, `key<TAB>value`. Used for lemma tables and developer
/// aliases.
fn parse_tsv(text: &str, what: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::invalid(format!("{what} line {}: expected two tab-separated columns", i + 1)))?;
        map.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(map)
}

/// Surface form to lemma lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaTable(HashMap<String, String>);

impl LemmaTable {
    pub fn parse(text: &str) -> Result<Self> {
        parse_tsv(text, "lemma table").map(LemmaTable)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.0.get(token).map(String::as_str)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for LemmaTable {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        LemmaTable(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

pub fn lemmatize(token: &str, table: &LemmaTable) -> String {
    table.get(token).unwrap_or(token).to_owned()
}

/// Developer alias to canonical id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasMap(HashMap<String, String>);

impl AliasMap {
    pub fn parse(text: &str) -> Result<Self> {
        parse_tsv(text, "alias map").map(AliasMap)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn resolve<'a>(&'a self, dev: &'a str) -> &'a str {
        self.0.get(dev).map(String::as_str).unwrap_or(dev)
    }
}

/// The full text pipeline: tokenize, drop stopwords, lemmatize, stem.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stopwords: StopwordSet,
    pub lemmas: LemmaTable,
    pub aliases: AliasMap,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            stopwords: StopwordSet::english(),
            lemmas: LemmaTable::default(),
            aliases: AliasMap::default(),
        }
    }
}

impl Preprocessor {
    pub fn terms(&self, text: &str) -> Vec<String> {
        remove_stopwords(tokenize(text), &self.stopwords)
            .iter()
            .map(|t| porter_stem(&lemmatize(t, &self.lemmas)))
            // stemming can shorten a token below the minimum length ("as" -> "a")
            .filter(|t| t.chars().count() >= 2)
            .collect()
    }

    /// Preprocesses every issue (title and description joined) and comment of
    /// a project. Issues come first, each group ordered by id.
    pub fn prepare(&self, project: &ProjectCorpus) -> Vec<PreparedDoc> {
        let issues: BTreeMap<&str, PreparedDoc> = project
            .issues
            .iter()
            .map(|i| {
                let doc = PreparedDoc {
                    doc_id: i.issue_id.clone(),
                    kind: DocKind::Issue,
                    author_or_assignee: i.assignee.as_deref().map(|a| self.aliases.resolve(a).to_owned()),
                    timestamp: i.created_at,
                    terms: self.terms(&format!("{}\n{}", i.title, i.description)),
                };
                (i.issue_id.as_str(), doc)
            })
            .collect();
        let comments: BTreeMap<&str, PreparedDoc> = project
            .comments
            .iter()
            .map(|c| {
                let doc = PreparedDoc {
                    doc_id: c.comment_id.clone(),
                    kind: DocKind::Comment,
                    author_or_assignee: Some(self.aliases.resolve(&c.author).to_owned()),
                    timestamp: c.created_at,
                    terms: self.terms(&c.body),
                };
                (c.comment_id.as_str(), doc)
            })
            .collect();
        issues.into_values().chain(comments.into_values()).collect()
    }
}
