use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use super::stats::{argmax, argmin, median};
use crate::realm::{absolute_frequency, ConceptRealm, Scope, Window};
use crate::{Error, Result};

pub const DEFAULT_LEAVER_RATIO: f64 = 0.10;
/// Quarters before and after a departure.
pub const SPAN: usize = 4;

/// Earliest quarter index `t` such that each of the next four quarters
/// (`t..t+4`) falls below `ratio` times the mean of the four before it, and
/// that mean is positive.
pub fn detect_departure(counts: &[u32], ratio: f64) -> Option<(usize, f64)> {
    if counts.len() < 2 * SPAN {
        return None;
    }
    (SPAN..=counts.len() - SPAN).find_map(|t| {
        let trailing = counts[t - SPAN..t].iter().map(|&c| f64::from(c)).sum::<f64>() / SPAN as f64;
        let limit = ratio * trailing;
        (trailing > 0.0 && counts[t..t + SPAN].iter().all(|&c| f64::from(c) < limit)).then_some((t, trailing))
    })
}

/// Per-developer comment counts for every quarter from the realm's first to
/// its last activity. Returns the ordinal of the first quarter.
pub fn quarterly_comment_counts(realm: &ConceptRealm) -> Option<(i64, BTreeMap<String, Vec<u32>>)> {
    let (first, last) = realm.quarter_span()?;
    let len = (last - first + 1) as usize;
    let mut out: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for c in realm.comments.values() {
        let q = crate::realm::quarter_ordinal(c.timestamp);
        out.entry(c.developer.clone()).or_insert_with(|| vec![0; len])[(q - first) as usize] += 1;
    }
    Some((first, out))
}

/// 1-based dense rank by descending count; tied counts share a rank.
pub fn dense_rank<K: Ord>(counts: &BTreeMap<K, u64>, who: &K) -> Option<usize> {
    let own = *counts.get(who)?;
    let mut distinct: Vec<u64> = counts.values().copied().filter(|&c| c > own).collect();
    distinct.sort_unstable();
    distinct.dedup();
    Some(distinct.len() + 1)
}

/// Rank of the developer by comment count within the window. Absent when
/// the developer did not comment there.
pub fn comment_rank(realm: &ConceptRealm, developer: &str, window: Window) -> Option<usize> {
    let counts: BTreeMap<&str, u64> = realm
        .comment_counts(window)
        .into_iter()
        .map(|(d, c)| (d, c as u64))
        .collect();
    dense_rank(&counts, &developer)
}

fn quarter_label(q: i64) -> String {
    format!("{}-Q{}", q.div_euclid(4), q.rem_euclid(4) + 1)
}

fn serialize_quarter<S: Serializer>(q: &i64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&quarter_label(*q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaverEvent {
    pub developer: String,
    pub project_key: String,
    /// Quarter ordinal (`year * 4 + quarter_index`).
    #[serde(serialize_with = "serialize_quarter")]
    pub departure_quarter: i64,
    pub trailing_avg: f64,
    pub comment_rank: usize,
}

impl LeaverEvent {
    pub fn pre_window(&self) -> Window {
        Window::quarters(self.departure_quarter - SPAN as i64, SPAN as i64)
    }

    pub fn post_window(&self) -> Window {
        Window::quarters(self.departure_quarter, SPAN as i64)
    }

    pub fn departure_label(&self) -> String {
        quarter_label(self.departure_quarter)
    }
}

/// One event per developer at their earliest qualifying quarter, ordered by
/// developer id.
pub fn detect_leavers(realm: &ConceptRealm, ratio: f64) -> Vec<LeaverEvent> {
    let Some((first, counts)) = quarterly_comment_counts(realm) else {
        return Vec::new();
    };
    counts
        .iter()
        .filter_map(|(dev, series)| {
            let (t, trailing_avg) = detect_departure(series, ratio)?;
            let q = first + t as i64;
            let pre = Window::quarters(q - SPAN as i64, SPAN as i64);
            Some(LeaverEvent {
                developer: dev.clone(),
                project_key: realm.project_key.clone(),
                departure_quarter: q,
                trailing_avg,
                comment_rank: comment_rank(realm, dev, pre).expect("trailing activity is positive"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Below,
    At,
    Above,
}

impl Relation {
    fn of(x: f64, median: f64) -> Self {
        if x < median {
            Relation::Below
        } else if x > median {
            Relation::Above
        } else {
            Relation::At
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Below => "below",
            Relation::At => "at",
            Relation::Above => "above",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnoverImpact {
    pub developer: String,
    #[serde(serialize_with = "serialize_quarter")]
    pub departure_quarter: i64,
    pub strongest_concept: usize,
    pub weakest_concept: usize,
    pub diff_strongest: f64,
    pub diff_weakest: f64,
    pub median_diff: f64,
    /// Post minus pre team acf, per concept.
    pub diffs: Vec<f64>,
    pub strongest_vs_median: Relation,
    pub weakest_vs_median: Relation,
}

/// Compares team acf after and before a departure. `leaver_pre` is the
/// leaver's own acf before the departure.
pub fn impact_from_acf(
    developer: &str,
    departure_quarter: i64,
    team_pre: &[f64],
    team_post: &[f64],
    leaver_pre: &[f64],
) -> Result<TurnoverImpact> {
    if leaver_pre.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid(format!("{developer} has no comments before the departure")));
    }
    let diffs: Vec<f64> = team_post.iter().zip(team_pre).map(|(b, a)| b - a).collect();
    let strongest = argmax(leaver_pre).expect("K >= 1");
    let weakest = argmin(leaver_pre).expect("K >= 1");
    let median_diff = median(&diffs).expect("K >= 1");
    Ok(TurnoverImpact {
        developer: developer.to_owned(),
        departure_quarter,
        strongest_concept: strongest,
        weakest_concept: weakest,
        diff_strongest: diffs[strongest],
        diff_weakest: diffs[weakest],
        median_diff,
        strongest_vs_median: Relation::of(diffs[strongest], median_diff),
        weakest_vs_median: Relation::of(diffs[weakest], median_diff),
        diffs,
    })
}

pub fn turnover_impact(realm: &ConceptRealm, leaver: &LeaverEvent) -> Result<TurnoverImpact> {
    let (pre, post) = (leaver.pre_window(), leaver.post_window());
    let team_pre = absolute_frequency(realm, &Scope::Team, pre).values;
    let team_post = absolute_frequency(realm, &Scope::Team, post).values;
    let own = absolute_frequency(realm, &Scope::Developer(leaver.developer.clone()), pre).values;
    impact_from_acf(&leaver.developer, leaver.departure_quarter, &team_pre, &team_post, &own)
}
