//! Metric files: one JSON record per line, tagged by `kind`, plus a plain
//! text table renderer.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ddx_core::metrics::DifferentialMetrics;
use ddx_core::rl::CurvePoint;

use super::push_json_line;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub k: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningMetrics {
    pub name: String,
    pub channel: String,
    pub cases: usize,
    pub mean_questions: f64,
    pub top_k: Vec<HitRate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRecord {
    pub name: String,
    pub channel: String,
    pub metrics: DifferentialMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsultationSummary {
    pub name: String,
    pub channel: String,
    pub cases: usize,
    pub top_k: Vec<HitRate>,
    pub confirmed: usize,
    pub correct_confirmations: usize,
    pub excluded: usize,
    pub screening_only: usize,
    pub errors: usize,
    pub mean_screening_questions: f64,
    pub mean_differential_questions: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricRecord {
    Training(CurvePoint),
    Screening(ScreeningMetrics),
    Differential(DifferentialRecord),
    Consultation(ConsultationSummary),
}

impl MetricRecord {
    fn kind(&self) -> &'static str {
        match self {
            MetricRecord::Training(_) => "training",
            MetricRecord::Screening(_) => "screening",
            MetricRecord::Differential(_) => "differential",
            MetricRecord::Consultation(_) => "consultation",
        }
    }
}

pub fn render_metrics<'a>(records: impl IntoIterator<Item = &'a MetricRecord>) -> String {
    let mut out = String::new();
    for r in records {
        push_json_line(&mut out, r);
    }
    out
}

pub fn parse_metrics(text: &str, path: &Path) -> Result<Vec<MetricRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, i + 1, e.to_string())))
        .collect()
}

pub fn save_metrics<'a>(records: impl IntoIterator<Item = &'a MetricRecord>, path: &Path) -> Result<()> {
    super::write(path, &render_metrics(records))
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    parse_metrics(&super::read(path)?, path)
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                if k == "kind" && prefix.is_empty() {
                    continue;
                }
                let key = match (prefix.is_empty(), k.as_str()) {
                    (true, "metrics") => String::new(),
                    (true, _) => k.clone(),
                    _ => format!("{prefix}.{k}"),
                };
                flatten(&key, inner, rows);
            }
        }
        Value::Array(items) if items.iter().all(|i| i.get("k").is_some() && i.get("rate").is_some()) => {
            for i in items {
                rows.push((format!("top{}", i["k"]), number(&i["rate"])));
            }
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(number).collect();
            rows.push((prefix.into(), parts.join(", ")));
        }
        other => rows.push((prefix.into(), number(other))),
    }
}

fn number(v: &Value) -> String {
    match v {
        Value::Null => "NA".into(),
        Value::Number(n) if n.is_f64() => format!("{:.4}", n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Renders each record as a titled block of `field value` rows. Missing
/// ratios print as `NA`.
pub fn render_table(records: &[MetricRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        let value = serde_json::to_value(r).expect("metric records always serialize");
        let mut rows = Vec::new();
        flatten("", &value, &mut rows);
        let title = value.get("name").and_then(Value::as_str).map(|n| format!(" {n}")).unwrap_or_default();
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "[{}{title}]", r.kind());
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows.iter().filter(|(k, _)| k != "name") {
            let _ = writeln!(out, "  {k:<width$}  {v}");
        }
    }
    out
}
