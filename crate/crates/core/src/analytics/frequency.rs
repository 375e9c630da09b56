use serde::Serialize;

use super::stats::{argmax, mse, percentile, population_variance};
use crate::realm::{developer_acf, developer_frequencies, issue_frequency, ConceptRealm, Window};
use crate::{Error, Result};

pub const VOLATILITY_PERCENTILE: f64 = 75.0;
/// Prefix sums are compared with this slack so that shares such as
/// `0.25 + 0.25` reach `0.5` despite rounding.
pub const SHARE_EPSILON: f64 = 1e-12;

/// 75th percentile, across concepts, of the population variance of
/// year-to-year changes in issue-level frequency. `series` holds one
/// frequency vector per year with issues, in time order.
pub fn volatility_from_series(series: &[Vec<f64>]) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let k = series[0].len();
    let variances: Vec<f64> = (0..k)
        .map(|c| {
            let deltas: Vec<f64> = series.windows(2).map(|w| w[1][c] - w[0][c]).collect();
            population_variance(&deltas).expect("at least two deltas")
        })
        .collect();
    percentile(&variances, VOLATILITY_PERCENTILE)
}

/// Yearly issue-level frequencies, skipping years without issues.
pub fn yearly_issue_frequencies(realm: &ConceptRealm) -> Vec<(i32, Vec<f64>)> {
    realm
        .issue_years()
        .into_iter()
        .filter_map(|y| issue_frequency(realm, Window::year(y)).map(|f| (y, f.values)))
        .collect()
}

/// Absent with fewer than three years holding issues.
pub fn concept_volatility(realm: &ConceptRealm) -> Option<f64> {
    let series: Vec<Vec<f64>> = yearly_issue_frequencies(realm).into_iter().map(|(_, v)| v).collect();
    volatility_from_series(&series)
}

/// Mean, over developers active in the window, of the MSE between the
/// issue-level and the developer's frequency vector.
pub fn issue_comment_mse(realm: &ConceptRealm, window: Window) -> Option<f64> {
    let team = issue_frequency(realm, window)?;
    let devs = developer_frequencies(realm, window);
    if devs.is_empty() {
        return None;
    }
    let total: f64 = devs.values().map(|d| mse(&team.values, &d.values)).sum();
    Some(total / devs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeeperCount {
    pub project_key: String,
    pub year: i32,
    pub concept_id: usize,
    pub threshold: f64,
    pub count: usize,
    pub n_developers: usize,
}

/// Shortest prefix of the descending shares whose sum reaches `threshold`.
/// `shares` must already be normalized to sum to one.
pub fn keepers_from_shares(shares: &[f64], threshold: f64) -> usize {
    let mut sorted = shares.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        acc += s;
        if acc >= threshold - SHARE_EPSILON {
            return i + 1;
        }
    }
    sorted.len()
}

/// Keepers of the year's most frequent issue-level concept.
pub fn count_keepers(realm: &ConceptRealm, year: i32, threshold: f64) -> Result<Option<KeeperCount>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("keeper threshold must be in (0, 1], got {threshold}")));
    }
    let window = Window::year(year);
    let Some(team) = issue_frequency(realm, window) else {
        return Ok(None);
    };
    let concept = argmax(&team.values).expect("K >= 1");
    let acf = developer_acf(realm, window);
    let total: f64 = acf.values().map(|v| v[concept]).sum();
    if acf.is_empty() || total <= 0.0 {
        return Ok(None);
    }
    let shares: Vec<f64> = acf.values().map(|v| v[concept] / total).collect();
    Ok(Some(KeeperCount {
        project_key: realm.project_key.clone(),
        year,
        concept_id: concept,
        threshold,
        count: keepers_from_shares(&shares, threshold),
        n_developers: acf.len(),
    }))
}
