//! Analyses over a concept realm. Every function here is pure; the realm is
//! never modified.

mod alignment;
mod distribution;
mod frequency;
mod stats;
mod turnover;

pub use alignment::{default_alignment_year, evaluate_alignment, AlignmentConfig, AlignmentResult};
pub use distribution::{
    concept_gap, distribution_entropy, distribution_stats, mean_reciprocal_rank, mean_reciprocal_rank_of,
    most_frequent_concept, normalized_entropy, rank_developers, realm_assignments, split_projects,
    DistributionStats, SplitLabel, DEFAULT_ENTROPY_TOP, DEFAULT_SPLIT_MARGIN,
};
pub use frequency::{
    concept_volatility, count_keepers, issue_comment_mse, keepers_from_shares, volatility_from_series,
    yearly_issue_frequencies, KeeperCount, SHARE_EPSILON, VOLATILITY_PERCENTILE,
};
pub use stats::{argmax, argmin, mean, median, mse, paired_t_test, percentile, population_variance, two_tailed_p, TTest};
pub use turnover::{
    comment_rank, dense_rank, detect_departure, detect_leavers, impact_from_acf, quarterly_comment_counts,
    turnover_impact, LeaverEvent, Relation, TurnoverImpact, DEFAULT_LEAVER_RATIO, SPAN,
};

use serde::{Deserialize, Serialize};

use crate::realm::{ConceptRealm, Window};
use crate::{Error, Result};

pub const DEFAULT_KEEPER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsConfig {
    pub keeper_threshold: f64,
    pub leaver_ratio: f64,
    pub split_margin: f64,
    pub entropy_top: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            keeper_threshold: DEFAULT_KEEPER_THRESHOLD,
            leaver_ratio: DEFAULT_LEAVER_RATIO,
            split_margin: DEFAULT_SPLIT_MARGIN,
            entropy_top: DEFAULT_ENTROPY_TOP,
        }
    }
}

impl AnalyticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keeper_threshold > 0.0 && self.keeper_threshold <= 1.0) {
            return Err(Error::invalid(format!("keeper threshold {} not in (0, 1]", self.keeper_threshold)));
        }
        if !(self.leaver_ratio > 0.0 && self.leaver_ratio < 1.0) {
            return Err(Error::invalid(format!("leaver ratio {} not in (0, 1)", self.leaver_ratio)));
        }
        if !(self.split_margin >= 0.0) {
            return Err(Error::invalid(format!("split margin {} is negative", self.split_margin)));
        }
        if self.entropy_top < 1 {
            return Err(Error::invalid("entropy top-k must be at least 1"));
        }
        Ok(())
    }
}

/// Everything computed for one project.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectAnalytics {
    pub project_key: String,
    pub k: usize,
    pub yearly_frequencies: Vec<(i32, Vec<f64>)>,
    pub volatility: Option<f64>,
    pub mse: Vec<(i32, Option<f64>)>,
    pub keepers: Vec<KeeperCount>,
    pub leavers: Vec<LeaverEvent>,
    pub impacts: Vec<TurnoverImpact>,
    pub distribution: Option<DistributionStats>,
    pub mrr: Option<f64>,
    pub n_assignments: usize,
    pub alignment: Option<AlignmentResult>,
}

/// Runs every realm-level analysis. Alignment needs the raw documents and is
/// attached separately.
pub fn analyze_realm(realm: &ConceptRealm, cfg: &AnalyticsConfig) -> Result<ProjectAnalytics> {
    cfg.validate()?;
    let years = realm.issue_years();
    let yearly_frequencies = yearly_issue_frequencies(realm);
    let mse = years
        .iter()
        .map(|&y| (y, issue_comment_mse(realm, Window::year(y))))
        .collect();
    let mut keepers = Vec::new();
    for &y in &years {
        keepers.extend(count_keepers(realm, y, cfg.keeper_threshold)?);
    }
    let leavers = detect_leavers(realm, cfg.leaver_ratio);
    let impacts = leavers
        .iter()
        .map(|l| turnover_impact(realm, l))
        .collect::<Result<Vec<_>>>()?;
    let assignments = realm_assignments(realm);
    let mrr = mean_reciprocal_rank(&assignments, realm, Window::all())?;
    Ok(ProjectAnalytics {
        project_key: realm.project_key.clone(),
        k: realm.k,
        volatility: volatility_from_series(&yearly_frequencies.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>()),
        yearly_frequencies,
        mse,
        keepers,
        leavers,
        impacts,
        distribution: distribution_stats(realm, Window::all(), cfg.entropy_top),
        mrr,
        n_assignments: assignments.len(),
        alignment: None,
    })
}

/// Labels every project with a gap by comparison with the others.
pub fn apply_split(projects: &mut [ProjectAnalytics], margin: f64) {
    let with_gap: Vec<(usize, f64)> = projects
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.distribution.as_ref()?.gap.map(|g| (i, g)))
        .collect();
    let gaps: Vec<f64> = with_gap.iter().map(|(_, g)| *g).collect();
    for ((i, _), label) in with_gap.iter().zip(split_projects(&gaps, margin)) {
        if let Some(d) = projects[*i].distribution.as_mut() {
            d.split = label;
        }
    }
}
