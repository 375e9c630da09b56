//! Seeded synthetic data with known ground truth: planted topics, planted
//! concept owners, planted keeper shares and planted departures.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawComment, RawIssue};
use crate::realm::{CommentEntry, ConceptRealm, IssueEntry, Windowing};
use crate::rng::{stream_id, stream_rng};
use crate::{Error, Result};

const CONSONANTS: &[u8] = b"bdfgkmnprt";
const VOWELS: &[u8] = b"aeiou";

/// A pseudo-word unique to `(topic, term)`. Ends in `x`, which stemming and
/// stopword removal leave alone.
pub fn pseudo_word(topic: usize, term: usize) -> String {
    let syl = |n: usize| {
        let c = CONSONANTS[n % CONSONANTS.len()] as char;
        let v = VOWELS[(n / CONSONANTS.len()) % VOWELS.len()] as char;
        format!("{c}{v}")
    };
    format!("{}{}x", syl(topic), syl(term))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicsConfig {
    pub topics: usize,
    pub documents: usize,
    pub tokens_per_document: usize,
    pub terms_per_topic: usize,
    /// Leading tokens that go into the issue title.
    pub title_tokens: usize,
    pub seed: u64,
}

impl TopicsConfig {
    pub fn new(topics: usize, seed: u64) -> Self {
        TopicsConfig {
            topics,
            documents: 200,
            tokens_per_document: 50,
            terms_per_topic: 10,
            title_tokens: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTopics {
    pub issues: Vec<RawIssue>,
    /// Support of each topic; supports are disjoint.
    pub topic_terms: Vec<Vec<String>>,
    /// Topic of each issue, aligned with `issues`.
    pub document_topics: Vec<usize>,
}

pub const TOPICS_PROJECT: &str = "SYN";

/// Every document is drawn from a single topic, each token uniformly from
/// that topic's support.
pub fn planted_topics(cfg: &TopicsConfig) -> Result<PlantedTopics> {
    let limit = CONSONANTS.len() * VOWELS.len();
    if cfg.topics == 0 || cfg.topics > limit || cfg.terms_per_topic == 0 || cfg.terms_per_topic > limit {
        return Err(Error::invalid(format!("topics and terms per topic must be in 1..={limit}")));
    }
    let topic_terms: Vec<Vec<String>> = (0..cfg.topics)
        .map(|t| (0..cfg.terms_per_topic).map(|j| pseudo_word(t, j)).collect())
        .collect();
    let start = Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap();
    let mut rng = stream_rng(cfg.seed, stream_id("synth:topics"));
    let mut issues = Vec::with_capacity(cfg.documents);
    let mut document_topics = Vec::with_capacity(cfg.documents);
    for i in 0..cfg.documents {
        let topic = rng.random_range(0..cfg.topics);
        let words: Vec<&str> = (0..cfg.tokens_per_document)
            .map(|_| topic_terms[topic].choose(&mut rng).expect("non-empty").as_str())
            .collect();
        let split = cfg.title_tokens.min(words.len());
        issues.push(RawIssue {
            project_key: TOPICS_PROJECT.to_owned(),
            issue_id: format!("{TOPICS_PROJECT}-{:04}", i + 1),
            title: words[..split].join(" "),
            description: words[split..].join(" "),
            created_at: start + Duration::hours(i as i64),
            assignee: None,
            reporter: None,
        });
        document_topics.push(topic);
    }
    Ok(PlantedTopics {
        issues,
        topic_terms,
        document_topics,
    })
}

/// Per-topic vocabularies of the synthetic project.
pub const LEXICONS: &[&[&str]] = &[
    &["database", "query", "index", "table", "schema", "transaction", "column", "migration", "cursor", "replica", "sql", "rollback"],
    &["button", "layout", "render", "widget", "font", "colour", "dialog", "menu", "screen", "theme", "icon", "scrollbar"],
    &["socket", "packet", "latency", "timeout", "proxy", "router", "bandwidth", "handshake", "protocol", "dns", "tcp", "firewall"],
    &["compiler", "maven", "dependency", "artifact", "plugin", "gradle", "classpath", "jar", "linker", "toolchain", "makefile", "bundle"],
    &["password", "encryption", "certificate", "token", "cipher", "credential", "vulnerability", "exploit", "signature", "keystore", "sandbox", "audit"],
    &["tutorial", "javadoc", "readme", "wiki", "guide", "example", "typo", "chapter", "glossary", "manual", "translation", "sentence"],
];

/// Shared words found in every kind of document.
pub const FILLER: &[&str] = &[
    "please", "see", "attached", "patch", "thanks", "looks", "good", "fixed", "version", "release", "problem", "change",
    "works", "need", "still", "think", "maybe", "update",
];

const NAMES: &[&str] = &[
    "alder", "birch", "cedar", "dogwood", "elm", "fir", "ginkgo", "hazel", "ilex", "juniper", "kapok", "larch", "maple",
    "nutmeg", "oak", "pine",
];

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Topic-term rows of the planted topics over `terms`: uniform on each
/// topic's support.
pub fn planted_rows(planted: &PlantedTopics, terms: &[String]) -> Vec<Vec<f64>> {
    planted
        .topic_terms
        .iter()
        .map(|support| {
            let p = 1.0 / support.len() as f64;
            terms.iter().map(|t| if support.contains(t) { p } else { 0.0 }).collect()
        })
        .collect()
}

/// Mean cosine after greedily pairing recovered and true rows, most similar
/// pair first. Unpaired true rows count as 0.
pub fn matched_cosine(recovered: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = recovered
        .iter()
        .enumerate()
        .flat_map(|(i, r)| truth.iter().enumerate().map(move |(j, t)| (cosine(r, t), i, j)))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; recovered.len()];
    let mut used_t = vec![false; truth.len()];
    let mut total = 0.0;
    for (c, i, j) in pairs {
        if !used_r[i] && !used_t[j] {
            used_r[i] = true;
            used_t[j] = true;
            total += c;
        }
    }
    total / truth.len() as f64
}

/// A developer who stops commenting at a given quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaverPlan {
    /// Topic the leaver owns.
    pub topic: usize,
    /// Quarter index (from the project start) of the first silent quarter.
    pub departure_quarter: usize,
    /// Whether a new owner takes the topic over after the departure.
    pub successor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub project_key: String,
    pub topics: usize,
    pub start_year: i32,
    pub years: usize,
    pub issues_per_quarter: usize,
    /// Developers who comment on any topic except a leaver's.
    pub generalists: usize,
    /// Chance that a given generalist comments on a given issue.
    pub generalist_rate: f64,
    /// Owner comments per issue are drawn from `1..=owner_comments`.
    pub owner_comments: usize,
    /// Share of tokens taken from the topic lexicon; the rest is filler.
    pub topical_share: f64,
    pub issue_tokens: usize,
    pub comment_tokens: usize,
    pub leaver: Option<LeaverPlan>,
    pub seed: u64,
}

impl ProjectConfig {
    pub fn new(project_key: impl Into<String>, seed: u64) -> Self {
        ProjectConfig {
            project_key: project_key.into(),
            topics: 3,
            start_year: 2010,
            years: 4,
            issues_per_quarter: 12,
            generalists: 2,
            generalist_rate: 0.5,
            owner_comments: 2,
            topical_share: 0.8,
            issue_tokens: 30,
            comment_tokens: 15,
            leaver: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.topics > LEXICONS.len() {
            return Err(Error::invalid(format!("topics must be in 1..={}", LEXICONS.len())));
        }
        let people = self.topics + self.generalists + usize::from(self.leaver.is_some_and(|l| l.successor));
        if people > NAMES.len() {
            return Err(Error::invalid(format!("at most {} developers are supported", NAMES.len())));
        }
        if !(0.0..=1.0).contains(&self.generalist_rate) || !(0.0..=1.0).contains(&self.topical_share) {
            return Err(Error::invalid("rates must be in [0, 1]"));
        }
        if self.owner_comments == 0 || self.years == 0 {
            return Err(Error::invalid("owner_comments and years must be positive"));
        }
        if let Some(l) = self.leaver {
            if l.topic >= self.topics || l.departure_quarter >= self.years * 4 {
                return Err(Error::invalid("leaver topic or departure quarter out of range"));
            }
        }
        Ok(())
    }

    pub fn owner(&self, topic: usize) -> &'static str {
        NAMES[topic]
    }

    pub fn generalist(&self, g: usize) -> &'static str {
        NAMES[self.topics + g]
    }

    pub fn successor(&self) -> &'static str {
        NAMES[self.topics + self.generalists]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProject {
    pub issues: Vec<RawIssue>,
    pub comments: Vec<RawComment>,
    /// Planted topic of each issue, aligned with `issues`.
    pub issue_topics: Vec<usize>,
}

fn quarter_start(year: i32, q: usize) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(year + (q / 4) as i32, (q % 4) as u32 * 3 + 1, 1, 0, 0, 0).unwrap()
}

fn text<R: Rng>(rng: &mut R, topic: usize, n: usize, topical_share: f64) -> String {
    (0..n)
        .map(|_| {
            let pool = if rng.random::<f64>() < topical_share { LEXICONS[topic] } else { FILLER };
            *pool.choose(rng).expect("non-empty")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A project where each topic has one exclusive owner, who is assigned all
/// of its issues and is the only non-generalist commenting on them.
/// Comments stay within their issue's quarter.
pub fn synth_project(cfg: &ProjectConfig) -> Result<SynthProject> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream_id(&format!("synth:project:{}", cfg.project_key)));
    let mut issues = Vec::new();
    let mut comments = Vec::new();
    let mut issue_topics = Vec::new();
    let mut comment_seq = 0usize;
    for q in 0..cfg.years * 4 {
        let start = quarter_start(cfg.start_year, q);
        for _ in 0..cfg.issues_per_quarter {
            let topic = rng.random_range(0..cfg.topics);
            let created = start + Duration::days(rng.random_range(0..75)) + Duration::minutes(rng.random_range(0..1440));
            let id = format!("{}-{}", cfg.project_key, issues.len() + 1);
            let departed = cfg.leaver.filter(|l| l.topic == topic && q >= l.departure_quarter);
            let owner = match departed {
                Some(l) if l.successor => Some(cfg.successor()),
                Some(_) => None,
                None => Some(cfg.owner(topic)),
            };
            let mut authors: Vec<&str> = Vec::new();
            if let Some(o) = owner {
                let n = rng.random_range(1..=cfg.owner_comments);
                authors.extend(std::iter::repeat_n(o, n));
            }
            let leaver_topic = cfg.leaver.map(|l| l.topic);
            for g in 0..cfg.generalists {
                if leaver_topic != Some(topic) && rng.random::<f64>() < cfg.generalist_rate {
                    authors.push(cfg.generalist(g));
                }
            }
            for author in authors {
                comment_seq += 1;
                let at = created + Duration::days(rng.random_range(1..=10)) + Duration::minutes(rng.random_range(0..1440));
                comments.push(RawComment {
                    project_key: cfg.project_key.clone(),
                    issue_id: id.clone(),
                    comment_id: format!("{}-c{comment_seq}", cfg.project_key),
                    author: author.to_owned(),
                    body: text(&mut rng, topic, cfg.comment_tokens, cfg.topical_share),
                    created_at: at,
                });
            }
            let body = text(&mut rng, topic, cfg.issue_tokens, cfg.topical_share);
            let (title, description) = body.split_at(body.match_indices(' ').nth(5).map_or(body.len(), |(i, _)| i));
            issues.push(RawIssue {
                project_key: cfg.project_key.clone(),
                issue_id: id,
                title: title.to_owned(),
                description: description.trim_start().to_owned(),
                created_at: created,
                assignee: owner.map(str::to_owned),
                reporter: None,
            });
            issue_topics.push(topic);
        }
    }
    Ok(SynthProject {
        issues,
        comments,
        issue_topics,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTrace {
    pub counts: Vec<u32>,
    /// Quarter index of the planted departure, if any.
    pub planted: Option<usize>,
}

/// `with` traces that fall silent at a random quarter and `without` traces
/// that stay active. Active quarters hold 10 to 40 comments.
pub fn activity_traces(with: usize, without: usize, quarters: usize, seed: u64) -> Result<Vec<ActivityTrace>> {
    if quarters < 8 {
        return Err(Error::invalid("activity traces need at least eight quarters"));
    }
    let mut rng = stream_rng(seed, stream_id("synth:traces"));
    let mut out = Vec::with_capacity(with + without);
    for i in 0..with + without {
        let planted = (i < with).then(|| rng.random_range(4..=quarters - 4));
        let counts = (0..quarters)
            .map(|q| match planted {
                Some(t) if q >= t => 0,
                _ => rng.random_range(10..=40),
            })
            .collect();
        out.push(ActivityTrace { counts, planted });
    }
    Ok(out)
}

pub const KEEPERS_PROJECT: &str = "KEEP";

/// A two-concept realm for one year in which concept 0 dominates the issues
/// and developer `i` holds `shares[i]` of that concept's comment frequency.
/// Shares are normalized to sum to one.
pub fn planted_keeper_realm(shares: &[f64], year: i32) -> Result<ConceptRealm> {
    let total: f64 = shares.iter().sum();
    if shares.is_empty() || shares.iter().any(|s| !(*s > 0.0)) || !total.is_finite() {
        return Err(Error::invalid("keeper shares must be positive"));
    }
    let start = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).single().ok_or_else(|| Error::invalid("bad year"))?;
    let mut realm = ConceptRealm::new(KEEPERS_PROJECT, 2, "planted", Windowing::Yearly);
    for i in 0..3 {
        let entry = IssueEntry { assignee: None, timestamp: start + Duration::days(i), weights: vec![1.0, 0.0] };
        realm.insert_issue(format!("{KEEPERS_PROJECT}-{}", i + 1), entry)?;
    }
    for (i, s) in shares.iter().enumerate() {
        let share = s / total;
        let entry = CommentEntry {
            developer: format!("dev{i:02}"),
            timestamp: start + Duration::days(10 + i as i64),
            weights: vec![share, 1.0 - share],
        };
        realm.insert_comment(format!("c{i:02}"), entry)?;
    }
    Ok(realm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{porter_stem, Preprocessor};
    use std::collections::BTreeSet;

    #[test]
    fn planted_keeper_shares() {
        use crate::analytics::count_keepers;
        let realm = planted_keeper_realm(&[0.6, 0.2, 0.1, 0.1], 2012).unwrap();
        let k = count_keepers(&realm, 2012, 0.5).unwrap().unwrap();
        assert_eq!((k.concept_id, k.count, k.n_developers), (0, 1, 4));
        let even = planted_keeper_realm(&[0.25; 4], 2012).unwrap();
        assert_eq!(count_keepers(&even, 2012, 0.5).unwrap().unwrap().count, 2);
        assert!(planted_keeper_realm(&[0.5, 0.0], 2012).is_err());
    }

    #[test]
    fn pseudo_words_survive_preprocessing() {
        let words: BTreeSet<String> = (0..10).flat_map(|t| (0..10).map(move |j| pseudo_word(t, j))).collect();
        assert_eq!(words.len(), 100);
        for w in &words {
            assert_eq!(&porter_stem(w), w);
        }
        let joined = words.iter().cloned().collect::<Vec<_>>().join(" ");
        assert_eq!(Preprocessor::default().terms(&joined).len(), 100);
    }

    #[test]
    fn planted_topics_shape_and_determinism() {
        let cfg = TopicsConfig::new(3, 7);
        let a = planted_topics(&cfg).unwrap();
        assert_eq!(a.issues.len(), 200);
        let first = &a.issues[0];
        assert_eq!(first.title.split(' ').count(), 5);
        assert_eq!(first.description.split(' ').count(), 45);
        let support: BTreeSet<&str> = a.topic_terms[a.document_topics[0]].iter().map(String::as_str).collect();
        assert!(first.title.split(' ').chain(first.description.split(' ')).all(|w| support.contains(w)));
        assert_eq!(planted_topics(&cfg).unwrap(), a);
        assert_ne!(planted_topics(&TopicsConfig::new(3, 8)).unwrap(), a);
    }

    #[test]
    fn lexicon_terms_stay_distinct_after_stemming() {
        let pre = Preprocessor::default();
        let mut stems = BTreeSet::new();
        for w in LEXICONS.iter().flat_map(|l| l.iter()).chain(FILLER) {
            let t = pre.terms(w);
            assert_eq!(t.len(), 1, "{w} lost in preprocessing");
            assert!(stems.insert(t[0].clone()), "{w} collides");
        }
    }

    #[test]
    fn project_owners_and_leaver() {
        let mut cfg = ProjectConfig::new("T", 3);
        cfg.leaver = Some(LeaverPlan { topic: 1, departure_quarter: 8, successor: false });
        let p = synth_project(&cfg).unwrap();
        assert_eq!(p.issues.len(), 16 * 12);
        for (issue, &topic) in p.issues.iter().zip(&p.issue_topics) {
            let q = crate::realm::quarter_ordinal(issue.created_at) - 2010 * 4;
            let expected = if topic == 1 && q >= 8 { None } else { Some(cfg.owner(topic)) };
            assert_eq!(issue.assignee.as_deref(), expected);
        }
        let leaver = cfg.owner(1);
        let late = quarter_start(2010, 8);
        assert!(p.comments.iter().filter(|c| c.author == leaver).all(|c| c.created_at < late));
        for c in &p.comments {
            let issue = p.issues.iter().find(|i| i.issue_id == c.issue_id).unwrap();
            assert_eq!(crate::realm::quarter_ordinal(c.created_at), crate::realm::quarter_ordinal(issue.created_at));
        }
    }

    #[test]
    fn matched_cosine_pairs_greedily() {
        let truth = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(matched_cosine(&[vec![0.0, 2.0], vec![3.0, 0.0]], &truth), 1.0);
        assert_eq!(matched_cosine(&[vec![1.0, 0.0]], &truth), 0.5);
    }

    #[test]
    fn traces() {
        let t = activity_traces(5, 5, 12, 1).unwrap();
        assert_eq!(t.len(), 10);
        for tr in &t[..5] {
            let p = tr.planted.unwrap();
            assert!(tr.counts[p..].iter().all(|&c| c == 0));
            assert!(tr.counts[..p].iter().all(|&c| (10..=40).contains(&c)));
        }
        assert!(t[5..].iter().all(|tr| tr.planted.is_none()));
    }
}
