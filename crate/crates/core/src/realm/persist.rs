//! JSON Lines form of a realm: one header record, then one record per
//! document (issues first, then comments, each in id order).

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{CommentEntry, ConceptRealm, IssueEntry, Windowing};
use crate::corpus::DocKind;
use crate::{Error, Result, FORMAT_VERSION};

const REALM_FORMAT: &str = "concept-realm-realm";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    project: String,
    k: usize,
    model_hash: String,
    windowing: Windowing,
}

#[derive(Serialize, Deserialize)]
struct Record {
    doc: String,
    kind: DocKind,
    dev: Option<String>,
    ts: String,
    weights: Vec<f64>,
}

fn format_ts(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl ConceptRealm {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header {
            format: REALM_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            project: self.project_key.clone(),
            k: self.k,
            model_hash: self.model_hash.clone(),
            windowing: self.windowing,
        };
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push(serde_json::to_string(&header).expect("header serializes"));
        for (id, issue) in &self.issues {
            let rec = Record {
                doc: id.clone(),
                kind: DocKind::Issue,
                dev: issue.assignee.clone(),
                ts: format_ts(issue.timestamp),
                weights: issue.weights.clone(),
            };
            push(serde_json::to_string(&rec).expect("record serializes"));
        }
        for (id, comment) in &self.comments {
            let rec = Record {
                doc: id.clone(),
                kind: DocKind::Comment,
                dev: Some(comment.developer.clone()),
                ts: format_ts(comment.timestamp),
                weights: comment.weights.clone(),
            };
            push(serde_json::to_string(&rec).expect("record serializes"));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::invalid("realm file is empty"))?;
        let header: Header = serde_json::from_str(first).map_err(|e| Error::json("realm header", e))?;
        if header.format != REALM_FORMAT || header.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported realm format {:?} version {}",
                header.format, header.version
            )));
        }
        let mut realm = ConceptRealm::new(header.project, header.k, header.model_hash, header.windowing);
        for (n, line) in lines {
            let ctx = format!("realm line {}", n + 1);
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::json(ctx.clone(), e))?;
            let timestamp = DateTime::parse_from_rfc3339(&rec.ts)
                .map_err(|e| Error::invalid(format!("{ctx}: bad timestamp {:?}: {e}", rec.ts)))?
                .with_timezone(&Utc);
            match rec.kind {
                DocKind::Issue => realm.insert_issue(
                    rec.doc,
                    IssueEntry {
                        assignee: rec.dev,
                        timestamp,
                        weights: rec.weights,
                    },
                )?,
                DocKind::Comment => {
                    let developer = rec.dev.ok_or_else(|| Error::invalid(format!("{ctx}: comment without developer")))?;
                    realm.insert_comment(
                        rec.doc,
                        CommentEntry {
                            developer,
                            timestamp,
                            weights: rec.weights,
                        },
                    )?
                }
            }
        }
        Ok(realm)
    }
}
