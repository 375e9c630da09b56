//! JSON Lines import of issue-tracker exports.
//!
//! Each line holds one record tagged by `kind`:
//!
//! ```text
//! {"kind":"issue","project":"P","id":"P-1","title":"...","description":"...",
//!  "created_at":"2012-03-01T10:00:00Z","assignee":"ann","reporter":null}
//! {"kind":"comment","project":"P","issue_id":"P-1","id":"c1","author":"bob",
//!  "body":"...","created_at":"2012-03-02T08:00:00Z"}
//! ```
//!
//! Bad lines never abort the import; they are collected in
//! [`ParsedExport::errors`] with their 1-based line number.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::Deserialize;
use serde_json::json;

use super::{RawComment, RawIssue};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedExport {
    pub issues: Vec<RawIssue>,
    pub comments: Vec<RawComment>,
    pub errors: Vec<LineError>,
}

#[derive(Deserialize)]
struct IssueRecord {
    project: String,
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: Option<String>,
    created_at: String,
    #[serde(default)]
    assignee: Option<String>,
    #[serde(default)]
    reporter: Option<String>,
}

#[derive(Deserialize)]
struct CommentRecord {
    project: String,
    issue_id: String,
    id: String,
    author: String,
    #[serde(default)]
    body: Option<String>,
    created_at: String,
}

/// Reads an export file. Only an unreadable file is fatal.
pub fn parse_export(path: &Path, format: ExportFormat) -> Result<ParsedExport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ExportFormat::Jsonl => Ok(parse_export_str(&text)),
    }
}

/// Parses JSON Lines text. Blank lines are skipped.
pub fn parse_export_str(text: &str) -> ParsedExport {
    let mut out = ParsedExport::default();
    let mut comment_lines = Vec::new();
    let mut issue_keys = HashSet::new();
    let mut comment_keys = HashSet::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fail = |message: String| out.errors.push(LineError { line: line_no, message });
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                fail(format!("malformed JSON: {e}"));
                continue;
            }
        };
        let kind = value.get("kind").and_then(|k| k.as_str()).map(str::to_owned);
        match kind.as_deref() {
            Some("issue") => match parse_issue(value) {
                Ok(issue) => {
                    if issue_keys.insert((issue.project_key.clone(), issue.issue_id.clone())) {
                        out.issues.push(issue);
                    } else {
                        fail(format!("duplicate issue id {:?} in project {:?}", issue.issue_id, issue.project_key));
                    }
                }
                Err(msg) => fail(msg),
            },
            Some("comment") => match parse_comment(value) {
                Ok(comment) => {
                    if comment_keys.insert((comment.project_key.clone(), comment.comment_id.clone())) {
                        comment_lines.push(line_no);
                        out.comments.push(comment);
                    } else {
                        fail(format!(
                            "duplicate comment id {:?} in project {:?}",
                            comment.comment_id, comment.project_key
                        ));
                    }
                }
                Err(msg) => fail(msg),
            },
            Some(other) => fail(format!("unknown record kind {other:?}")),
            None => fail("record has no \"kind\" field".to_owned()),
        }
    }

    // Comments may precede their issue in the file, so the reference check
    // runs once every issue is known.
    let mut kept = Vec::with_capacity(out.comments.len());
    for (comment, line) in out.comments.drain(..).zip(comment_lines) {
        if issue_keys.contains(&(comment.project_key.clone(), comment.issue_id.clone())) {
            kept.push(comment);
        } else {
            out.errors.push(LineError {
                line,
                message: format!("comment {:?} references unknown issue {:?}", comment.comment_id, comment.issue_id),
            });
        }
    }
    out.comments = kept;
    out.errors.sort_by_key(|e| e.line);
    out
}

fn parse_issue(value: serde_json::Value) -> Result<RawIssue, String> {
    let r: IssueRecord = serde_json::from_value(value).map_err(|e| format!("invalid issue record: {e}"))?;
    Ok(RawIssue {
        created_at: parse_timestamp(&r.created_at)?,
        project_key: r.project,
        issue_id: r.id,
        title: r.title.unwrap_or_default(),
        description: r.description.unwrap_or_default(),
        assignee: r.assignee.filter(|a| !a.is_empty()),
        reporter: r.reporter.filter(|a| !a.is_empty()),
    })
}

fn parse_comment(value: serde_json::Value) -> Result<RawComment, String> {
    let r: CommentRecord = serde_json::from_value(value).map_err(|e| format!("invalid comment record: {e}"))?;
    if r.author.is_empty() {
        return Err(format!("comment {:?} has an empty author", r.id));
    }
    Ok(RawComment {
        created_at: parse_timestamp(&r.created_at)?,
        project_key: r.project,
        issue_id: r.issue_id,
        comment_id: r.id,
        author: r.author,
        body: r.body.unwrap_or_default(),
    })
}

/// Accepts RFC 3339 and the common offset-less ISO-8601 forms (read as UTC).
pub(crate) fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("unparseable timestamp {s:?}"))
}

/// Serializes records in the import format: issues first, then comments,
/// each in the given order. The output parses back to the same records.
pub fn export_to_string(issues: &[RawIssue], comments: &[RawComment]) -> String {
    let ts = |t: &DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::AutoSi, true);
    let mut out = String::new();
    for i in issues {
        let rec = json!({
            "kind": "issue",
            "project": i.project_key,
            "id": i.issue_id,
            "title": i.title,
            "description": i.description,
            "created_at": ts(&i.created_at),
            "assignee": i.assignee,
            "reporter": i.reporter,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    for c in comments {
        let rec = json!({
            "kind": "comment",
            "project": c.project_key,
            "issue_id": c.issue_id,
            "id": c.comment_id,
            "author": c.author,
            "body": c.body,
            "created_at": ts(&c.created_at),
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}
