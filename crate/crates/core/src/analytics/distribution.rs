use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use super::stats::{argmax, median};
use crate::realm::{developer_acf, developer_frequencies, issue_frequency, ConceptRealm, Window};
use crate::{Error, Result};

pub const DEFAULT_ENTROPY_TOP: usize = 5;
pub const DEFAULT_SPLIT_MARGIN: f64 = 0.01;

/// Shannon entropy of the `top` largest values, normalized to sum one and
/// divided by `ln(min(top, values.len()))`. One participant gives 0. Absent
/// when no value is positive.
pub fn normalized_entropy(values: &[f64], top: usize) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.truncate(top);
    let total: f64 = sorted.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let m = sorted.len();
    if m < 2 {
        return Some(0.0);
    }
    let h: f64 = sorted
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    Some((h / (m as f64).ln()).clamp(0.0, 1.0))
}

/// Entropy of the top developers' acf for one concept.
pub fn distribution_entropy(realm: &ConceptRealm, concept: usize, window: Window, top: usize) -> Option<f64> {
    let acf: Vec<f64> = developer_acf(realm, window).values().map(|v| v[concept]).collect();
    normalized_entropy(&acf, top)
}

/// Argmax of issue-level frequency over the window, lowest id on ties.
pub fn most_frequent_concept(realm: &ConceptRealm, window: Window) -> Option<usize> {
    issue_frequency(realm, window).and_then(|f| argmax(&f.values))
}

/// Largest minus median developer share of the concept's acf.
pub fn concept_gap(realm: &ConceptRealm, concept: usize, window: Window) -> Option<f64> {
    let acf: Vec<f64> = developer_acf(realm, window).values().map(|v| v[concept]).collect();
    let total: f64 = acf.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let shares: Vec<f64> = acf.iter().map(|v| v / total).collect();
    let max = shares.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(max - median(&shares)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SplitLabel {
    Equal,
    Unequal,
    Neither,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Equal => "Equal",
            SplitLabel::Unequal => "Unequal",
            SplitLabel::Neither => "Neither",
        })
    }
}

/// Labels projects by how far their gap lies from the cross-project median.
pub fn split_projects(gaps: &[f64], margin: f64) -> Vec<SplitLabel> {
    if gaps.len() < 2 {
        return vec![SplitLabel::Neither; gaps.len()];
    }
    let m = median(gaps).expect("non-empty");
    gaps.iter()
        .map(|&g| {
            if g > m + margin {
                SplitLabel::Unequal
            } else if g < m - margin {
                SplitLabel::Equal
            } else {
                SplitLabel::Neither
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionStats {
    pub project_key: String,
    pub concept_id: usize,
    pub top5_entropy: Option<f64>,
    pub gap: Option<f64>,
    pub split: SplitLabel,
}

/// Entropy and gap for the project's most frequent concept over the window.
/// The split label is filled in once all projects are known.
pub fn distribution_stats(realm: &ConceptRealm, window: Window, top: usize) -> Option<DistributionStats> {
    let concept = most_frequent_concept(realm, window)?;
    Some(DistributionStats {
        project_key: realm.project_key.clone(),
        concept_id: concept,
        top5_entropy: distribution_entropy(realm, concept, window, top),
        gap: concept_gap(realm, concept, window),
        split: SplitLabel::Neither,
    })
}

/// Developers by descending frequency at `concept`, ties by ascending id.
pub fn rank_developers(realm: &ConceptRealm, concept: usize, window: Window) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = developer_frequencies(realm, window)
        .into_iter()
        .map(|(d, f)| (d, f.values[concept]))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Mean of `1 / rank`; an unranked entry contributes 0.
pub fn mean_reciprocal_rank_of(ranks: &[Option<usize>]) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    let sum: f64 = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum();
    Some(sum / ranks.len() as f64)
}

/// MRR of the assignees among developers ranked by frequency at each
/// issue's strongest concept.
pub fn mean_reciprocal_rank(assignments: &[(String, String)], realm: &ConceptRealm, window: Window) -> Result<Option<f64>> {
    let freqs = developer_frequencies(realm, window);
    let mut ranks = Vec::with_capacity(assignments.len());
    for (issue, assignee) in assignments {
        let entry = realm
            .issues
            .get(issue)
            .ok_or_else(|| Error::invalid(format!("issue {issue} is not in the realm")))?;
        let concept = argmax(&entry.weights).expect("K >= 1");
        let own = freqs.get(assignee).map(|f| f.values[concept]);
        let rank = own.map(|own| {
            1 + freqs
                .iter()
                .filter(|(d, f)| f.values[concept] > own || (f.values[concept] == own && *d < assignee))
                .count()
        });
        ranks.push(rank);
    }
    Ok(mean_reciprocal_rank_of(&ranks))
}

/// Issues with an assignee, in id order.
pub fn realm_assignments(realm: &ConceptRealm) -> Vec<(String, String)> {
    realm
        .issues
        .iter()
        .filter_map(|(id, i)| i.assignee.clone().map(|a| (id.clone(), a)))
        .collect()
}
