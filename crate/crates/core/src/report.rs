//! Evaluation reports. JSON keeps every computed value at full precision;
//! rounding happens only when rendering Markdown.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adapt::{Separation, TrainConfig, TrainSummary};
use crate::capst::{AspectPair, CapstReport, Prf};
use crate::corpus::{CorpusStats, ValidationReport};
use crate::judge::Aspect;
use crate::retrieval::{RecallTable, ReBiasScore};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub entries: usize,
    pub errors: usize,
    pub warnings: usize,
    /// Only entries with at least one finding.
    pub findings: Vec<ValidationReport>,
}

impl ValidationSummary {
    pub fn from_reports(reports: Vec<ValidationReport>) -> Self {
        let entries = reports.len();
        let errors = reports.iter().map(|r| r.errors.len()).sum();
        let warnings = reports.iter().map(|r| r.warnings.len()).sum();
        let findings = reports
            .into_iter()
            .filter(|r| !r.errors.is_empty() || !r.warnings.is_empty())
            .collect();
        Self {
            entries,
            errors,
            warnings,
            findings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingResult {
    pub config: TrainConfig,
    pub summary: TrainSummary,
    pub train_separation: Separation,
    pub held_out_separation: Option<Separation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkResult {
    pub text: String,
    pub tokens: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub text: String,
    pub aspect: Aspect,
    pub elements: Vec<String>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub rows: usize,
    pub dim: usize,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum Payload {
    Validation(ValidationSummary),
    Stats(CorpusStats),
    Retrieval(Vec<RecallTable>),
    Rebias(ReBiasScore),
    Capst(CapstReport),
    Training(TrainingResult),
    Topk(Vec<TopkResult>),
    Extraction(Vec<ExtractionResult>),
    Embedding(EmbeddingSummary),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Validation(_) => "validation",
            Payload::Stats(_) => "stats",
            Payload::Retrieval(_) => "retrieval",
            Payload::Rebias(_) => "rebias",
            Payload::Capst(_) => "capst",
            Payload::Training(_) => "training",
            Payload::Topk(_) => "topk",
            Payload::Extraction(_) => "extraction",
            Payload::Embedding(_) => "embedding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub command: String,
    /// The fully resolved configuration the command ran with.
    pub config: Value,
    pub payload: Payload,
    pub provenance: BTreeMap<String, Value>,
}

impl EvalReport {
    pub fn new(command: &str, config: Value, payload: Payload) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            timestamp: None,
            command: command.to_string(),
            config,
            payload,
            provenance: BTreeMap::new(),
        }
    }

    pub fn with_provenance(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("provenance values serialize");
        self.provenance.insert(key.to_string(), v);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format `{other}` (expected json or markdown)")),
        }
    }
}

pub fn render(report: &EvalReport, format: Format) -> String {
    match format {
        Format::Json => render_json(report),
        Format::Markdown => render_markdown(report),
    }
}

pub fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// `F1/Recall/Precision`, each as a one-decimal percentage.
pub fn prf_cell(p: Option<&Prf>) -> String {
    match p {
        Some(p) => format!("{}/{}/{}", pct(p.f1), pct(p.recall), pct(p.precision)),
        None => "n/a".to_string(),
    }
}

fn capst_row(out: &mut String, label: &str, pair: &AspectPair) {
    let n = pair
        .action
        .map(|p| p.videos)
        .into_iter()
        .chain(pair.object.map(|p| p.videos))
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        out,
        "| {label} | {} | {} | {n} |",
        prf_cell(pair.action.as_ref()),
        prf_cell(pair.object.as_ref())
    );
}

fn recall_ks(tables: &[RecallTable]) -> Vec<usize> {
    let mut ks: Vec<usize> = tables
        .iter()
        .flat_map(|t| t.t2v.keys().chain(t.v2t.keys()).copied())
        .collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# careval {} report\n", report.payload.kind());
    let _ = writeln!(out, "- tool version: {}", report.tool_version);
    if let Some(ts) = &report.timestamp {
        let _ = writeln!(out, "- timestamp: {ts}");
    }
    let _ = writeln!(out, "- command: `{}`\n", report.command);

    match &report.payload {
        Payload::Validation(v) => {
            let _ = writeln!(
                out,
                "{} entries, {} errors, {} warnings\n",
                v.entries, v.errors, v.warnings
            );
            if !v.findings.is_empty() {
                out.push_str("| Entry | Errors | Warnings |\n|---|---|---|\n");
                for r in &v.findings {
                    let codes = |f: &[crate::corpus::Finding]| {
                        f.iter().map(|x| x.code()).collect::<Vec<_>>().join(", ")
                    };
                    let _ = writeln!(out, "| {} | {} | {} |", r.entry_id, codes(&r.errors), codes(&r.warnings));
                }
            }
        }
        Payload::Stats(s) => {
            let _ = writeln!(
                out,
                "{} entries, mean general-caption length {:.1} words, mean duration {:.1} s\n",
                s.count, s.mean_words, s.mean_duration_s
            );
            out.push_str("| Category | Videos |\n|---|---|\n");
            for (c, n) in &s.per_category {
                let _ = writeln!(out, "| {c} | {n} |");
            }
        }
        Payload::Retrieval(tables) => {
            let ks = recall_ks(tables);
            out.push_str("| Split |");
            for dir in ["T2V", "V2T"] {
                for k in &ks {
                    let _ = write!(out, " {dir} R@{k} |");
                }
            }
            out.push_str("\n|---|");
            out.push_str(&"---|".repeat(2 * ks.len()));
            out.push('\n');
            for t in tables {
                let _ = write!(out, "| {} |", t.split);
                for map in [&t.t2v, &t.v2t] {
                    for k in &ks {
                        match map.get(k) {
                            Some(v) => {
                                let _ = write!(out, " {v:.1} |");
                            }
                            None => out.push_str(" n/a |"),
                        }
                    }
                }
                out.push('\n');
            }
        }
        Payload::Rebias(r) => {
            out.push_str("| Mean spatial | Mean temporal | ReBias |\n|---|---|---|\n");
            let _ = writeln!(
                out,
                "| {:.2} | {:.2} | {:.2} |\n",
                r.mean_spatial, r.mean_temporal, r.bias_percent
            );
            let orientation = serde_json::to_value(r.orientation).expect("orientation serializes");
            let _ = writeln!(
                out,
                "Orientation: `{}`: {}",
                orientation.as_str().unwrap_or_default(),
                r.orientation.provenance()
            );
        }
        Payload::Capst(c) => {
            out.push_str("Cells are F1/Recall/Precision in percent.\n\n");
            out.push_str("| Category | Action | Object | Videos |\n|---|---|---|---|\n");
            for (cat, pair) in &c.per_category {
                capst_row(&mut out, cat, pair);
            }
            capst_row(&mut out, "**Overall**", &c.overall);
            let _ = writeln!(out, "\n{} videos judged", c.judged_videos);
            if !c.skipped.is_empty() {
                out.push_str("\nSkipped:\n\n");
                for s in &c.skipped {
                    let _ = writeln!(out, "- {} ({}): {}", s.video_id, s.aspect, s.reason);
                }
            }
            if !c.truncated.is_empty() {
                let _ = writeln!(out, "\nElement lists truncated: {}", c.truncated.join(", "));
            }
        }
        Payload::Training(t) => {
            let s = &t.summary;
            out.push_str("| Quantity | Value |\n|---|---|\n");
            let _ = writeln!(out, "| initial loss | {:.4} |", s.initial_loss);
            let _ = writeln!(out, "| final loss | {:.4} |", s.final_loss);
            let _ = writeln!(out, "| steps | {} |", s.steps);
            let _ = writeln!(out, "| vocabulary size | {} |", s.vocab_size);
            let mut sep = |label: &str, v: &Separation| {
                let _ = writeln!(
                    out,
                    "| {label} cos(a,p) - cos(a,n) | {:.4} ({:.4} - {:.4}) |",
                    v.margin(),
                    v.mean_cos_positive,
                    v.mean_cos_negative
                );
            };
            sep("train", &t.train_separation);
            if let Some(h) = &t.held_out_separation {
                sep("held-out", h);
            }
        }
        Payload::Topk(list) => {
            for r in list {
                let tokens: Vec<String> = r.tokens.iter().map(|(t, l)| format!("{t} ({l:.3})")).collect();
                let _ = writeln!(out, "- {}: {}", r.text, tokens.join(", "));
            }
        }
        Payload::Extraction(list) => {
            for r in list {
                let _ = writeln!(out, "## {} ({})\n", r.text, r.aspect);
                if r.elements.is_empty() {
                    out.push_str("(no elements)\n");
                }
                for e in &r.elements {
                    let _ = writeln!(out, "- {e}");
                }
                if r.truncated {
                    out.push_str("\n(truncated at the element cap)\n");
                }
                out.push('\n');
            }
        }
        Payload::Embedding(e) => {
            let _ = writeln!(out, "Wrote {} × {} embeddings to `{}`", e.rows, e.dim, e.output);
        }
    }

    if !report.provenance.is_empty() {
        out.push_str("\n## Provenance\n\n");
        for (k, v) in &report.provenance {
            match v {
                Value::String(s) => {
                    let _ = writeln!(out, "- {k}: {s}");
                }
                other => {
                    let _ = writeln!(out, "- {k}: {other}");
                }
            }
        }
    }
    out.push_str("\n## Config\n\n```json\n");
    out.push_str(&serde_json::to_string_pretty(&report.config).expect("config serializes"));
    out.push_str("\n```\n");
    out
}
