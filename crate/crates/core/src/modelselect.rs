//! Choosing the number of concepts: coherence minus concept overlap.
//!
//! Coherence uses NPMI over boolean sliding windows (110 tokens by default;
//! documents shorter than a window count as a single window), either as the
//! mean over term pairs or through indirect cosine similarity. Overlap is the
//! mean pairwise Jaccard similarity of the concepts' top-10 term sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary};
use crate::topicmodel::{top_term_indices, train_lda, LdaModel, TrainConfig, TOP_TERMS};
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 110;

/// Smoothing guard: an NPMI denominator `-ln p(i,j)` below this counts as zero.
pub const NPMI_EPSILON: f64 = 1e-12;

/// `|A ∩ B| / |A ∪ B|`; two empty sets give 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Mean pairwise Jaccard over all unordered pairs of sets; fewer than two sets
/// give 0.
pub fn mean_pairwise_jaccard<T: Ord>(sets: &[BTreeSet<T>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            total += jaccard(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

fn top_sets(model: &LdaModel) -> Vec<BTreeSet<usize>> {
    (0..model.k())
        .map(|c| {
            top_term_indices(model, c, TOP_TERMS)
                .expect("concept in range")
                .into_iter()
                .collect()
        })
        .collect()
}

pub fn concept_overlap(model: &LdaModel) -> f64 {
    mean_pairwise_jaccard(&top_sets(model))
}

/// Boolean sliding-window occurrence counts.
///
/// Each document of length `L >= w` contributes the `L - w + 1` windows
/// `tokens[i..i + w]`; shorter non-empty documents contribute one window.
#[derive(Debug, Clone)]
pub struct WindowStats<T = usize> {
    n_windows: u64,
    /// Sorted window ids containing each tracked term.
    postings: HashMap<T, Vec<u64>>,
}

impl<T: Copy + Eq + Hash> WindowStats<T> {
    /// Counts windows over the token streams. When `tracked` is given only
    /// those terms are recorded.
    pub fn build<'a, I>(streams: I, window: usize, tracked: Option<&BTreeSet<T>>) -> Self
    where
        I: IntoIterator<Item = &'a [T]>,
        T: 'a + Ord,
    {
        let window = window.max(1);
        let mut postings: HashMap<T, Vec<u64>> = HashMap::new();
        let mut n_windows = 0u64;
        let mut seen: HashMap<T, usize> = HashMap::new();
        for tokens in streams {
            if tokens.is_empty() {
                continue;
            }
            let span = window.min(tokens.len());
            let count = tokens.len() - span + 1;
            // Incremental window multiset: add the entering token, drop the
            // leaving one.
            seen.clear();
            for &t in &tokens[..span] {
                *seen.entry(t).or_insert(0) += 1;
            }
            for start in 0..count {
                if start > 0 {
                    let out = tokens[start - 1];
                    let e = seen.get_mut(&out).expect("present");
                    *e -= 1;
                    if *e == 0 {
                        seen.remove(&out);
                    }
                    *seen.entry(tokens[start + span - 1]).or_insert(0) += 1;
                }
                let id = n_windows;
                n_windows += 1;
                for &t in seen.keys() {
                    if tracked.is_none_or(|set| set.contains(&t)) {
                        postings.entry(t).or_default().push(id);
                    }
                }
            }
        }
        WindowStats { n_windows, postings }
    }

    pub fn n_windows(&self) -> u64 {
        self.n_windows
    }

    /// Windows containing the term.
    pub fn count(&self, term: T) -> u64 {
        self.postings.get(&term).map_or(0, |p| p.len() as u64)
    }

    /// Windows containing both terms.
    pub fn joint_count(&self, a: T, b: T) -> u64 {
        let (Some(pa), Some(pb)) = (self.postings.get(&a), self.postings.get(&b)) else {
            return 0;
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Normalized pointwise mutual information of two terms, in `[-1, 1]`.
///
/// `ln(p(i,j) / (p(i) p(j))) / -ln p(i,j)`, evaluated from integer window
/// counts so that perfect association, independence and exclusion land on
/// exactly 1, 0 and -1. Terms that never co-occur score -1; terms present in
/// every window score 1.
pub fn npmi<T: Copy + Eq + Hash>(a: T, b: T, stats: &WindowStats<T>) -> Result<f64> {
    let (na, nb) = (stats.count(a), stats.count(b));
    if na == 0 || nb == 0 {
        return Err(Error::invalid("term never observed in any window"));
    }
    let nab = stats.joint_count(a, b);
    if nab == 0 {
        return Ok(-1.0);
    }
    let n = stats.n_windows as f64;
    let denom = (n / nab as f64).ln();
    if denom < NPMI_EPSILON {
        return Ok(1.0);
    }
    let ratio = (nab as f64 * n) / (na as f64 * nb as f64);
    Ok((ratio.ln() / denom).clamp(-1.0, 1.0))
}

/// Mean NPMI over all term pairs; fewer than two terms give 0.
pub fn term_set_coherence<T: Copy + Eq + Hash>(terms: &[T], stats: &WindowStats<T>) -> Result<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            total += npmi(terms[i], terms[j], stats)?;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}

/// Indirect cosine coherence. Each term's context vector holds its NPMI with
/// every term of the set (1 with itself); the score is the mean cosine
/// between each context vector and their sum.
pub fn indirect_cosine_coherence<T: Copy + Eq + Hash>(terms: &[T], stats: &WindowStats<T>) -> Result<f64> {
    if terms.is_empty() {
        return Ok(0.0);
    }
    let vectors: Vec<Vec<f64>> = terms
        .iter()
        .map(|&a| {
            terms
                .iter()
                .map(|&b| if a == b { Ok(1.0) } else { npmi(a, b, stats) })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let total: Vec<f64> = (0..terms.len()).map(|j| vectors.iter().map(|v| v[j]).sum()).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let total_norm = norm(&total);
    let cosine = |v: &[f64]| {
        let denom = norm(v) * total_norm;
        if denom == 0.0 {
            0.0
        } else {
            v.iter().zip(&total).map(|(a, b)| a * b).sum::<f64>() / denom
        }
    };
    Ok(vectors.iter().map(|v| cosine(v)).sum::<f64>() / terms.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceMeasure {
    /// Mean pairwise NPMI.
    #[default]
    Npmi,
    /// Indirect cosine over NPMI context vectors.
    Cv,
}

impl CoherenceMeasure {
    pub fn score<T: Copy + Eq + Hash>(self, terms: &[T], stats: &WindowStats<T>) -> Result<f64> {
        match self {
            CoherenceMeasure::Npmi => term_set_coherence(terms, stats),
            CoherenceMeasure::Cv => indirect_cosine_coherence(terms, stats),
        }
    }
}

impl fmt::Display for CoherenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoherenceMeasure::Npmi => "npmi",
            CoherenceMeasure::Cv => "cv",
        })
    }
}

impl FromStr for CoherenceMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "npmi" => Ok(CoherenceMeasure::Npmi),
            "cv" => Ok(CoherenceMeasure::Cv),
            other => Err(Error::invalid(format!("unknown coherence measure {other:?}"))),
        }
    }
}

/// Per-concept coherence of the model's top-10 terms.
pub fn concept_coherences(model: &LdaModel, stats: &WindowStats, measure: CoherenceMeasure) -> Result<Vec<f64>> {
    (0..model.k())
        .map(|c| measure.score(&top_term_indices(model, c, TOP_TERMS)?, stats))
        .collect()
}

/// Model coherence: mean over concepts of the coherence of each concept's
/// top-10 terms.
pub fn coherence(model: &LdaModel, documents: &[Document], window: usize, measure: CoherenceMeasure) -> Result<f64> {
    let tracked: BTreeSet<usize> = top_sets(model).into_iter().flatten().collect();
    let stats = WindowStats::build(documents.iter().map(|d| d.tokens.as_slice()), window, Some(&tracked));
    let scores = concept_coherences(model, &stats, measure)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KRecord {
    pub k: usize,
    pub coherence: f64,
    pub overlap: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelectionResult {
    /// Successful candidates in ascending K.
    pub records: Vec<KRecord>,
    /// Candidates that failed to train or score, with the reason.
    pub failures: Vec<(usize, String)>,
    pub chosen_k: usize,
    pub mean_coherence: f64,
    pub mean_overlap: f64,
}

/// Largest score wins; ties go to the smaller K.
pub fn choose_k(records: &[KRecord]) -> Option<usize> {
    let mut best: Option<&KRecord> = None;
    for r in records {
        match best {
            Some(b) if r.score < b.score || (r.score == b.score && r.k > b.k) => {}
            _ => best = Some(r),
        }
    }
    best.map(|r| r.k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub base_seed: u64,
    /// Template for every candidate; `k` and `seed` are overwritten.
    pub train: TrainConfig,
    pub window: usize,
    pub measure: CoherenceMeasure,
}

impl SweepConfig {
    pub fn new(k_min: usize, k_max: usize, base_seed: u64) -> Self {
        SweepConfig {
            k_min,
            k_max,
            base_seed,
            train: TrainConfig::new(1, base_seed),
            window: DEFAULT_WINDOW,
            measure: CoherenceMeasure::Npmi,
        }
    }

    /// Training configuration of one candidate: seed is `base_seed XOR K`.
    pub fn candidate(&self, k: usize) -> TrainConfig {
        TrainConfig {
            k,
            seed: self.base_seed ^ k as u64,
            ..self.train
        }
    }
}

/// Trains one model per K in `k_min..=k_max` (in parallel on the current rayon
/// pool) and picks the best coherence minus overlap.
pub fn select_k(documents: &[Document], vocabulary: &Vocabulary, sweep: &SweepConfig) -> Result<KSelectionResult> {
    if sweep.k_min == 0 || sweep.k_min > sweep.k_max {
        return Err(Error::invalid(format!("invalid K range {}..={}", sweep.k_min, sweep.k_max)));
    }
    let outcomes: Vec<(usize, Result<LdaModel>)> = (sweep.k_min..=sweep.k_max)
        .into_par_iter()
        .map(|k| (k, train_lda(documents, vocabulary, &sweep.candidate(k))))
        .collect();

    let tracked: BTreeSet<usize> = outcomes
        .iter()
        .filter_map(|(_, m)| m.as_ref().ok())
        .flat_map(top_sets)
        .flatten()
        .collect();
    let stats = WindowStats::build(documents.iter().map(|d| d.tokens.as_slice()), sweep.window, Some(&tracked));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (k, outcome) in outcomes {
        let scored = outcome.and_then(|model| {
            let per_concept = concept_coherences(&model, &stats, sweep.measure)?;
            let coherence = per_concept.iter().sum::<f64>() / per_concept.len() as f64;
            let overlap = concept_overlap(&model);
            Ok(KRecord {
                k,
                coherence,
                overlap,
                score: coherence - overlap,
            })
        });
        match scored {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("K={k} excluded from selection: {e}");
                failures.push((k, e.to_string()));
            }
        }
    }
    let chosen_k = choose_k(&records).ok_or_else(|| Error::NotAnalyzable("every candidate K failed to train".into()))?;
    let n = records.len() as f64;
    Ok(KSelectionResult {
        mean_coherence: records.iter().map(|r| r.coherence).sum::<f64>() / n,
        mean_overlap: records.iter().map(|r| r.overlap).sum::<f64>() / n,
        records,
        failures,
        chosen_k,
    })
}
