//! The `synth` command: deterministic fixtures with known ground truth.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use concept_realm::corpus::export_to_string;
use concept_realm::realm::Window;
use concept_realm::report::{write_atomic, Table};
use concept_realm::synth::{
    activity_traces, planted_keeper_realm, planted_topics, synth_project, LeaverPlan, ProjectConfig, TopicsConfig,
};
use concept_realm::Error;

use crate::args::{Scenario, SynthArgs};
use crate::CliError;

fn usage(e: Error) -> CliError {
    match e {
        Error::InvalidInput(m) => CliError::Usage(m),
        other => CliError::Data(other),
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => Ok(write_atomic(p, bytes)?),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Data(Error::io("<stdout>", e))),
    }
}

/// Generated bytes and their ground truth.
pub fn generate(a: &SynthArgs) -> Result<(Vec<u8>, Value), CliError> {
    match a.scenario {
        Scenario::Topics => {
            let cfg = TopicsConfig {
                documents: a.documents,
                tokens_per_document: a.tokens,
                terms_per_topic: a.terms_per_topic,
                ..TopicsConfig::new(a.topics, a.seed)
            };
            let planted = planted_topics(&cfg).map_err(usage)?;
            let documents: serde_json::Map<String, Value> = planted
                .issues
                .iter()
                .zip(&planted.document_topics)
                .map(|(i, &t)| (i.issue_id.clone(), json!(t)))
                .collect();
            let truth = json!({
                "scenario": "topics",
                "config": cfg,
                "topic_terms": planted.topic_terms,
                "document_topics": documents,
            });
            Ok((export_to_string(&planted.issues, &[]).into_bytes(), truth))
        }
        Scenario::Project => {
            let cfg = ProjectConfig {
                topics: a.topics,
                start_year: a.start_year,
                years: a.years,
                issues_per_quarter: a.issues_per_quarter,
                generalists: a.generalists,
                leaver: a.leaver_topic.zip(a.leaver_quarter).map(|(topic, departure_quarter)| LeaverPlan {
                    topic,
                    departure_quarter,
                    successor: a.successor,
                }),
                ..ProjectConfig::new(a.project_key.clone(), a.seed)
            };
            let p = synth_project(&cfg).map_err(usage)?;
            let issue_topics: serde_json::Map<String, Value> =
                p.issues.iter().zip(&p.issue_topics).map(|(i, &t)| (i.issue_id.clone(), json!(t))).collect();
            let leaver = cfg.leaver.map(|l| {
                let q = Window::quarters(cfg.start_year as i64 * 4 + l.departure_quarter as i64, 1);
                json!({
                    "developer": cfg.owner(l.topic),
                    "topic": l.topic,
                    "departure_quarter": q.to_string(),
                    "successor": l.successor.then(|| cfg.successor()),
                })
            });
            let truth = json!({
                "scenario": "project",
                "config": cfg,
                "owners": (0..cfg.topics).map(|t| cfg.owner(t)).collect::<Vec<_>>(),
                "generalists": (0..cfg.generalists).map(|g| cfg.generalist(g)).collect::<Vec<_>>(),
                "issue_topics": issue_topics,
                "leaver": leaver,
            });
            Ok((export_to_string(&p.issues, &p.comments).into_bytes(), truth))
        }
        Scenario::Traces => {
            let traces = activity_traces(a.with_departure, a.without_departure, a.quarters, a.seed).map_err(usage)?;
            let mut header = vec!["trace".to_owned(), "planted".to_owned()];
            header.extend((0..a.quarters).map(|q| format!("q{q}")));
            let mut table = Table::new(header);
            for (i, t) in traces.iter().enumerate() {
                let mut row = vec![i.to_string(), t.planted.map(|p| p.to_string()).unwrap_or_default()];
                row.extend(t.counts.iter().map(u32::to_string));
                table.push(row);
            }
            let truth = json!({ "scenario": "traces", "seed": a.seed, "traces": traces });
            Ok((table.to_csv()?, truth))
        }
        Scenario::Keepers => {
            let realm = planted_keeper_realm(&a.shares, a.start_year).map_err(usage)?;
            let truth = json!({
                "scenario": "keepers",
                "year": a.start_year,
                "concept": 0,
                "shares": a.shares,
            });
            Ok((realm.to_jsonl().into_bytes(), truth))
        }
    }
}

pub fn run(a: &SynthArgs) -> Result<(), CliError> {
    let (bytes, truth) = generate(a)?;
    if let Some(path) = &a.truth {
        let mut text = serde_json::to_string_pretty(&truth).expect("truth serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    emit(a.out.as_deref(), &bytes)
}
