//! Cross-project summaries and every emitted CSV and plot data file.

mod output;
mod table;

pub use output::{
    build_manifest, read_manifest, sha256_hex, write_artifacts, write_atomic, write_reports, Artifact, Manifest,
    ManifestEntry, MANIFEST_NAME,
};
pub use table::{fmt_float, fmt_opt, Table};

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Utc};
use serde::Serialize;

use crate::analytics::{median, ProjectAnalytics};
use crate::corpus::{DocKind, PreparedDoc, ProjectCorpus};
use crate::modelselect::KSelectionResult;
use crate::Result;

pub const MIN_BRACKET_AGE: u32 = 3;
pub const MAX_BRACKET_AGE: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectSummary {
    pub project_key: String,
    pub first_year: Option<i32>,
    /// Whole years elapsed from the first to the last activity.
    pub age_years: Option<u32>,
    pub n_issues: usize,
    pub n_comments: usize,
    pub n_developers: usize,
    pub chosen_k: Option<usize>,
    pub has_volatility: bool,
    pub has_keepers: bool,
    pub has_leavers: bool,
    pub has_distribution: bool,
    pub has_mrr: bool,
    pub has_alignment: bool,
}

impl ProjectSummary {
    /// Age clamped to the reported bracket range.
    pub fn bracket(&self) -> Option<u32> {
        self.age_years.map(|a| a.clamp(MIN_BRACKET_AGE, MAX_BRACKET_AGE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketRow {
    pub age: u32,
    pub n_projects: usize,
    pub n_issues: usize,
    pub n_comments: usize,
    pub n_developers: usize,
    pub median_developers: f64,
}

/// Corpus-level counts of one project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectStats {
    pub project_key: String,
    pub first_activity: Option<DateTime<Utc>>,
    pub last_activity: Option<DateTime<Utc>>,
    pub n_issues: usize,
    pub n_comments: usize,
    /// Distinct comment authors and assignees.
    pub n_developers: usize,
}

impl ProjectStats {
    fn collect<'a>(
        project_key: &str,
        n_issues: usize,
        n_comments: usize,
        timestamps: impl Iterator<Item = DateTime<Utc>> + Clone,
        developers: impl Iterator<Item = &'a str>,
    ) -> Self {
        let devs: BTreeSet<&str> = developers.collect();
        ProjectStats {
            project_key: project_key.to_owned(),
            first_activity: timestamps.clone().min(),
            last_activity: timestamps.max(),
            n_issues,
            n_comments,
            n_developers: devs.len(),
        }
    }

    pub fn from_corpus(corpus: &ProjectCorpus) -> Self {
        let times = corpus
            .issues
            .iter()
            .map(|i| i.created_at)
            .chain(corpus.comments.iter().map(|c| c.created_at));
        Self::collect(
            &corpus.project_key,
            corpus.issues.len(),
            corpus.comments.len(),
            times,
            corpus.developers().into_iter(),
        )
    }

    pub fn from_prepared(project_key: &str, docs: &[PreparedDoc]) -> Self {
        let n_issues = docs.iter().filter(|d| d.kind == DocKind::Issue).count();
        Self::collect(
            project_key,
            n_issues,
            docs.len() - n_issues,
            docs.iter().map(|d| d.timestamp),
            docs.iter().filter_map(|d| d.author_or_assignee.as_deref()),
        )
    }
}

/// One summary per project, plus the age-bracket table. Missing analytics or
/// K choices only clear the corresponding flags.
pub fn summarize(
    projects: &[ProjectStats],
    chosen_k: &BTreeMap<String, usize>,
    analytics: &[ProjectAnalytics],
) -> (Vec<ProjectSummary>, Vec<BracketRow>) {
    let by_key: BTreeMap<&str, &ProjectAnalytics> = analytics.iter().map(|a| (a.project_key.as_str(), a)).collect();
    let mut summaries: Vec<ProjectSummary> = projects
        .iter()
        .map(|c| {
            let a = by_key.get(c.project_key.as_str());
            ProjectSummary {
                project_key: c.project_key.clone(),
                first_year: c.first_activity.map(|t| t.year()),
                age_years: c.first_activity.zip(c.last_activity).and_then(|(f, l)| l.years_since(f)),
                n_issues: c.n_issues,
                n_comments: c.n_comments,
                n_developers: c.n_developers,
                chosen_k: chosen_k.get(&c.project_key).copied(),
                has_volatility: a.is_some_and(|a| a.volatility.is_some()),
                has_keepers: a.is_some_and(|a| !a.keepers.is_empty()),
                has_leavers: a.is_some_and(|a| !a.leavers.is_empty()),
                has_distribution: a.is_some_and(|a| a.distribution.is_some()),
                has_mrr: a.is_some_and(|a| a.mrr.is_some()),
                has_alignment: a.is_some_and(|a| a.alignment.is_some()),
            }
        })
        .collect();
    summaries.sort_by(|a, b| a.project_key.cmp(&b.project_key));

    let mut groups: BTreeMap<u32, Vec<&ProjectSummary>> = BTreeMap::new();
    for s in &summaries {
        if let Some(age) = s.bracket() {
            groups.entry(age).or_default().push(s);
        }
    }
    let brackets = groups
        .into_iter()
        .map(|(age, ps)| {
            let devs: Vec<f64> = ps.iter().map(|p| p.n_developers as f64).collect();
            BracketRow {
                age,
                n_projects: ps.len(),
                n_issues: ps.iter().map(|p| p.n_issues).sum(),
                n_comments: ps.iter().map(|p| p.n_comments).sum(),
                n_developers: ps.iter().map(|p| p.n_developers).sum(),
                median_developers: median(&devs).expect("non-empty group"),
            }
        })
        .collect();
    (summaries, brackets)
}

fn s<T: ToString>(x: T) -> String {
    x.to_string()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(";")
}

pub fn summary_table(summaries: &[ProjectSummary]) -> Table {
    let mut t = Table::new([
        "project",
        "age_years",
        "n_issues",
        "n_comments",
        "n_developers",
        "chosen_k",
        "volatility",
        "keepers",
        "leavers",
        "distribution",
        "mrr",
        "alignment",
    ]);
    for p in summaries {
        t.push(vec![
            p.project_key.clone(),
            opt(p.age_years),
            s(p.n_issues),
            s(p.n_comments),
            s(p.n_developers),
            opt(p.chosen_k),
            s(p.has_volatility),
            s(p.has_keepers),
            s(p.has_leavers),
            s(p.has_distribution),
            s(p.has_mrr),
            s(p.has_alignment),
        ]);
    }
    t
}

pub fn bracket_table(rows: &[BracketRow]) -> Table {
    let mut t = Table::new(["age", "n_projects", "n_issues", "n_comments", "n_developers", "median_developers"]);
    for r in rows {
        t.push(vec![
            s(r.age),
            s(r.n_projects),
            s(r.n_issues),
            s(r.n_comments),
            s(r.n_developers),
            fmt_float(r.median_developers),
        ]);
    }
    t
}

pub fn select_k_table(result: &KSelectionResult) -> Table {
    let mut t = Table::new(["k", "coherence", "overlap", "score", "chosen", "error"]);
    let mut rows: Vec<(usize, Vec<String>)> = result
        .records
        .iter()
        .map(|r| {
            let row = vec![
                s(r.k),
                fmt_float(r.coherence),
                fmt_float(r.overlap),
                fmt_float(r.score),
                s(r.k == result.chosen_k),
                String::new(),
            ];
            (r.k, row)
        })
        .collect();
    rows.extend(result.failures.iter().map(|(k, e)| {
        let row = vec![s(k), String::new(), String::new(), String::new(), s(false), e.clone()];
        (*k, row)
    }));
    rows.sort_by_key(|(k, _)| *k);
    for (_, row) in rows {
        t.push(row);
    }
    t
}

pub fn alignment_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new([
        "project",
        "year",
        "n_test_issues",
        "active_developer",
        "mean_assignee_score",
        "mean_active_score",
        "mean_diff",
        "accuracy",
        "t_statistic",
        "degrees_of_freedom",
        "p_value",
        "degenerate_variance",
    ]);
    if let Some(r) = &a.alignment {
        t.push(vec![
            r.project_key.clone(),
            s(r.year),
            s(r.n_test_issues),
            r.active_developer.clone(),
            fmt_float(r.mean_assignee_score),
            fmt_float(r.mean_active_score),
            fmt_float(r.mean_diff),
            fmt_float(r.accuracy),
            fmt_float(r.t_statistic),
            s(r.degrees_of_freedom),
            fmt_float(r.p_value),
            s(r.degenerate_variance),
        ]);
    }
    t
}

pub fn volatility_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "n_years", "percentile", "variance_method", "volatility"]);
    t.push(vec![
        a.project_key.clone(),
        s(a.yearly_frequencies.len()),
        fmt_float(crate::analytics::VOLATILITY_PERCENTILE),
        "population".into(),
        fmt_opt(a.volatility),
    ]);
    t
}

pub fn mse_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "year", "mse"]);
    for (y, m) in &a.mse {
        t.push(vec![a.project_key.clone(), s(y), fmt_opt(*m)]);
    }
    t
}

pub fn keepers_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "year", "concept", "threshold", "count", "n_developers"]);
    for k in &a.keepers {
        t.push(vec![
            k.project_key.clone(),
            s(k.year),
            s(k.concept_id),
            fmt_float(k.threshold),
            s(k.count),
            s(k.n_developers),
        ]);
    }
    t
}

pub fn leavers_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "developer", "departure_quarter", "trailing_avg", "comment_rank"]);
    for l in &a.leavers {
        t.push(vec![
            l.project_key.clone(),
            l.developer.clone(),
            l.departure_label(),
            fmt_float(l.trailing_avg),
            s(l.comment_rank),
        ]);
    }
    t
}

pub fn impact_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new([
        "project",
        "developer",
        "departure_quarter",
        "strongest_concept",
        "weakest_concept",
        "diff_strongest",
        "diff_weakest",
        "median_diff",
        "strongest_vs_median",
        "weakest_vs_median",
        "diffs",
    ]);
    for (i, l) in a.impacts.iter().zip(&a.leavers) {
        t.push(vec![
            a.project_key.clone(),
            i.developer.clone(),
            l.departure_label(),
            s(i.strongest_concept),
            s(i.weakest_concept),
            fmt_float(i.diff_strongest),
            fmt_float(i.diff_weakest),
            fmt_float(i.median_diff),
            s(i.strongest_vs_median),
            s(i.weakest_vs_median),
            floats(&i.diffs),
        ]);
    }
    t
}

pub fn entropy_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "concept", "top5_entropy", "gap", "split"]);
    if let Some(d) = &a.distribution {
        t.push(vec![
            d.project_key.clone(),
            s(d.concept_id),
            fmt_opt(d.top5_entropy),
            fmt_opt(d.gap),
            s(d.split),
        ]);
    }
    t
}

pub fn mrr_table(a: &ProjectAnalytics) -> Table {
    let mut t = Table::new(["project", "n_assignments", "split", "mrr"]);
    let split = a.distribution.as_ref().map(|d| d.split.to_string()).unwrap_or_default();
    t.push(vec![a.project_key.clone(), s(a.n_assignments), split, fmt_opt(a.mrr)]);
    t
}

/// Keeps project keys usable as path components.
pub fn path_component(key: &str) -> String {
    key.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// The per-project analysis CSVs.
pub fn project_artifacts(a: &ProjectAnalytics) -> Result<Vec<Artifact>> {
    let dir = path_component(&a.project_key);
    let tables = [
        ("alignment.csv", alignment_table(a)),
        ("volatility.csv", volatility_table(a)),
        ("mse.csv", mse_table(a)),
        ("keepers.csv", keepers_table(a)),
        ("leavers.csv", leavers_table(a)),
        ("impact.csv", impact_table(a)),
        ("entropy.csv", entropy_table(a)),
        ("mrr.csv", mrr_table(a)),
    ];
    tables
        .into_iter()
        .map(|(name, t)| Ok(Artifact::new(format!("{dir}/{name}"), t.to_csv()?)))
        .collect()
}

fn series(name: String, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Artifact> {
    let mut t = Table::new(["x", "y"]);
    for (x, y) in points {
        t.push(vec![fmt_float(x), fmt_float(y)]);
    }
    Ok(Artifact::new(format!("plots/{name}.csv"), t.to_csv()?))
}

fn mean_by_key(points: Vec<(i64, f64)>) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (k, v) in points {
        groups.entry(k).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|(k, vs)| (k as f64, vs.iter().sum::<f64>() / vs.len() as f64))
        .collect()
}

/// Plot data files, one `x,y` series per file. Pooled series without
/// points are skipped.
pub fn plot_artifacts(
    summaries: &[ProjectSummary],
    analytics: &[ProjectAnalytics],
    selections: &BTreeMap<String, KSelectionResult>,
) -> Result<Vec<Artifact>> {
    let summary: BTreeMap<&str, &ProjectSummary> = summaries.iter().map(|s| (s.project_key.as_str(), s)).collect();
    let mut out = Vec::new();

    for (key, sel) in selections {
        let p = path_component(key);
        out.push(series(format!("k_selection_coherence_{p}"), sel.records.iter().map(|r| (r.k as f64, r.coherence)))?);
        out.push(series(format!("k_selection_overlap_{p}"), sel.records.iter().map(|r| (r.k as f64, r.overlap)))?);
    }

    let mut volatility = Vec::new();
    let mut entropy = Vec::new();
    let mut mse = Vec::new();
    let mut keepers = Vec::new();
    let mut strongest = Vec::new();
    let mut weakest = Vec::new();
    let mut mrr_gap = Vec::new();
    for a in analytics {
        let p = path_component(&a.project_key);
        for c in 0..a.k {
            let pts = a.yearly_frequencies.iter().map(|(y, v)| (f64::from(*y), v[c]));
            out.push(series(format!("issue_frequency_{p}_concept_{c}"), pts)?);
        }
        let s = summary.get(a.project_key.as_str());
        let age = s.and_then(|s| s.age_years).map(f64::from);
        let first = s.and_then(|s| s.first_year);
        if let (Some(age), Some(v)) = (age, a.volatility) {
            volatility.push((age, v));
        }
        if let (Some(age), Some(e)) = (age, a.distribution.as_ref().and_then(|d| d.top5_entropy)) {
            entropy.push((age, e));
        }
        if let Some(first) = first {
            mse.extend(a.mse.iter().filter_map(|(y, m)| m.map(|m| (i64::from(y - first + 1), m))));
            keepers.extend(a.keepers.iter().map(|k| (i64::from(k.year - first + 1), k.count as f64)));
        }
        for i in &a.impacts {
            strongest.push((i.median_diff, i.diff_strongest));
            weakest.push((i.median_diff, i.diff_weakest));
        }
        if let (Some(g), Some(m)) = (a.distribution.as_ref().and_then(|d| d.gap), a.mrr) {
            mrr_gap.push((g, m));
        }
    }
    let by_x = |mut v: Vec<(f64, f64)>| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    };
    let pooled = [
        ("volatility_by_age", by_x(volatility)),
        ("entropy_by_age", by_x(entropy)),
        ("mse_by_project_year", mean_by_key(mse)),
        ("keepers_by_project_year", mean_by_key(keepers)),
        ("impact_strongest_vs_median", by_x(strongest)),
        ("impact_weakest_vs_median", by_x(weakest)),
        ("mrr_by_gap", by_x(mrr_gap)),
    ];
    for (name, points) in pooled {
        if !points.is_empty() {
            out.push(series(name.into(), points)?);
        }
    }
    Ok(out)
}

/// Cross-project files: summary, brackets and plots.
pub fn summary_artifacts(
    summaries: &[ProjectSummary],
    brackets: &[BracketRow],
    analytics: &[ProjectAnalytics],
    selections: &BTreeMap<String, KSelectionResult>,
) -> Result<Vec<Artifact>> {
    let mut out = vec![
        Artifact::new("summary.csv", summary_table(summaries).to_csv()?),
        Artifact::new("brackets.csv", bracket_table(brackets).to_csv()?),
    ];
    out.extend(plot_artifacts(summaries, analytics, selections)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RawComment, RawIssue};
    use chrono::{TimeZone, Utc};

    fn corpus(key: &str, first: i32, last: i32, n_issues: usize, devs: usize) -> ProjectCorpus {
        let issues = (0..n_issues)
            .map(|i| RawIssue {
                project_key: key.into(),
                issue_id: format!("{key}-{i}"),
                title: "t".into(),
                description: String::new(),
                created_at: Utc.with_ymd_and_hms(if i == 0 { first } else { last }, 1, 1, 0, 0, 0).unwrap(),
                assignee: None,
                reporter: None,
            })
            .collect();
        let comments = (0..devs)
            .map(|d| RawComment {
                project_key: key.into(),
                issue_id: format!("{key}-0"),
                comment_id: format!("{key}-c{d}"),
                author: format!("dev{d}"),
                body: "b".into(),
                created_at: Utc.with_ymd_and_hms(last, 2, 1, 0, 0, 0).unwrap(),
            })
            .collect();
        ProjectCorpus { project_key: key.into(), issues, comments }
    }

    #[test]
    fn single_project_bracket() {
        let (sums, brackets) = summarize(&[ProjectStats::from_corpus(&corpus("A", 2010, 2013, 10, 4))], &BTreeMap::new(), &[]);
        assert_eq!(sums[0].age_years, Some(3));
        assert_eq!(
            brackets,
            [BracketRow { age: 3, n_projects: 1, n_issues: 10, n_comments: 4, n_developers: 4, median_developers: 4.0 }]
        );
        assert!(!sums[0].has_alignment);
    }

    #[test]
    fn age_counts_whole_years() {
        let at = |y, m, d| Some(Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap());
        let stats = |first, last| ProjectStats {
            project_key: "P".into(),
            first_activity: first,
            last_activity: last,
            n_issues: 1,
            n_comments: 0,
            n_developers: 0,
        };
        let age = |first, last| summarize(&[stats(first, last)], &BTreeMap::new(), &[]).0[0].age_years;
        assert_eq!(age(at(2010, 3, 1), at(2013, 2, 28)), Some(2));
        assert_eq!(age(at(2010, 3, 1), at(2013, 3, 1)), Some(3));
        assert_eq!(age(None, None), None);
    }

    #[test]
    fn even_count_median_and_clamped_ages() {
        let corpora: Vec<ProjectStats> = [
            corpus("A", 2010, 2013, 5, 3),
            corpus("B", 2011, 2014, 5, 6),
            corpus("C", 2014, 2014, 5, 1),
            corpus("D", 2000, 2014, 5, 2),
            corpus("E", 2012, 2015, 5, 4),
        ]
        .iter()
        .map(ProjectStats::from_corpus)
        .collect();
        let (sums, brackets) = summarize(&corpora, &BTreeMap::new(), &[]);
        let ages: Vec<Option<u32>> = sums.iter().map(|s| s.age_years).collect();
        assert_eq!(ages, [Some(3), Some(3), Some(0), Some(14), Some(3)]);
        assert_eq!(sums[2].bracket(), Some(3));
        assert_eq!(sums[3].bracket(), Some(10));
        let csv = String::from_utf8(bracket_table(&brackets).to_csv().unwrap()).unwrap();
        assert_eq!(
            csv,
            "age,n_projects,n_issues,n_comments,n_developers,median_developers\n3,4,20,14,14,3.5\n10,1,5,2,2,2\n"
        );
    }

    #[test]
    fn empty_analytics_emit_summary_files_only() {
        let (sums, brackets) = summarize(&[], &BTreeMap::new(), &[]);
        let artifacts = summary_artifacts(&sums, &brackets, &[], &BTreeMap::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_reports(dir.path(), &artifacts).unwrap();
        let paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["brackets.csv", "summary.csv"]);
    }
}
