//! Differential-diagnosis metrics and error reports for procedure refinement.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procedure::{Outcome, RunTrace};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no cases to score")]
    Empty,
    #[error("{0} outcomes but {1} labels")]
    LengthMismatch(usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Scores of a batch of differential runs. Precision, recall and F1 are
/// `None` where their denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialMetrics {
    pub cases: usize,
    pub failures: usize,
    pub success_rate: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: Confusion,
}

/// Confirm counts as a positive prediction; exclude and failure as negative.
pub fn differential_metrics(outcomes: &[Outcome], labels: &[bool]) -> Result<DifferentialMetrics, MetricsError> {
    if outcomes.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(outcomes.len(), labels.len()));
    }
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = Confusion::default();
    let mut failures = 0;
    for (&o, &positive) in outcomes.iter().zip(labels) {
        if o == Outcome::Failure {
            failures += 1;
        }
        match (o == Outcome::Confirm, positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let n = outcomes.len() as f64;
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(DifferentialMetrics {
        cases: outcomes.len(),
        failures,
        success_rate: (outcomes.len() - failures) as f64 / n,
        accuracy: (c.tp + c.tn) as f64 / n,
        precision,
        recall,
        f1,
        confusion: c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    FalseNegative,
    FalsePositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub record_id: String,
    pub kind: ErrorKind,
    pub outcome: Outcome,
    pub trace: RunTrace,
}

/// Errors leaving the procedure through the same edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorGroup {
    pub kind: ErrorKind,
    pub outcome: Outcome,
    pub last_node: Option<String>,
    pub answer: Option<bool>,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub cases: Vec<ErrorCase>,
    /// Sorted by count, largest first; ties by key.
    pub groups: Vec<ErrorGroup>,
    /// Errors whose path visited each node.
    pub per_node: BTreeMap<String, usize>,
    pub false_negatives: usize,
    pub false_positives: usize,
}

impl ErrorReport {
    pub fn total(&self) -> usize {
        self.cases.len()
    }

    /// Most frequent last node among errors of `kind`.
    pub fn most_common_last_node(&self, kind: ErrorKind) -> Option<&str> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for c in self.cases.iter().filter(|c| c.kind == kind) {
            if let Some(n) = c.trace.last_node() {
                *counts.entry(n).or_default() += 1;
            }
        }
        let mut best: Option<(&str, usize)> = None;
        for (n, k) in counts {
            if best.map_or(true, |(_, b)| k > b) {
                best = Some((n, k));
            }
        }
        best.map(|(n, _)| n)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.cases.is_empty() {
            out.push_str("no errors\n");
            return out;
        }
        let _ = writeln!(
            out,
            "{} errors: {} false negatives, {} false positives",
            self.total(),
            self.false_negatives,
            self.false_positives
        );
        out.push_str("by exit edge:\n");
        for g in &self.groups {
            let kind = match g.kind {
                ErrorKind::FalseNegative => "FN",
                ErrorKind::FalsePositive => "FP",
            };
            let edge = match (&g.last_node, g.answer) {
                (Some(n), Some(true)) => format!("{n} --yes-->"),
                (Some(n), Some(false)) => format!("{n} --no-->"),
                _ => String::from("(no question)"),
            };
            let outcome = match g.outcome {
                Outcome::Confirm => "confirm",
                Outcome::Exclude => "exclude",
                Outcome::Failure => "failure",
            };
            let _ = writeln!(out, "  {kind:2} {count:>5}  {edge} {outcome}", count = g.count);
        }
        out.push_str("by node on path:\n");
        let mut nodes: Vec<_> = self.per_node.iter().collect();
        nodes.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        for (n, k) in nodes {
            let _ = writeln!(out, "  {k:>5}  {n}");
        }
        out
    }
}

/// Collects misdiagnosed cases and groups them by (error kind, outcome, last
/// node, last answer).
pub fn build_error_report(
    record_ids: &[String],
    traces: &[RunTrace],
    labels: &[bool],
) -> Result<ErrorReport, MetricsError> {
    if traces.len() != labels.len() || record_ids.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(traces.len(), labels.len()));
    }
    let mut report = ErrorReport::default();
    let mut groups: BTreeMap<(ErrorKind, Outcome, Option<String>, Option<bool>), usize> = BTreeMap::new();
    for ((id, trace), &positive) in record_ids.iter().zip(traces).zip(labels) {
        let predicted = trace.outcome == Outcome::Confirm;
        let kind = match (predicted, positive) {
            (false, true) => ErrorKind::FalseNegative,
            (true, false) => ErrorKind::FalsePositive,
            _ => continue,
        };
        match kind {
            ErrorKind::FalseNegative => report.false_negatives += 1,
            ErrorKind::FalsePositive => report.false_positives += 1,
        }
        *groups.entry((kind, trace.outcome, trace.last_node().map(String::from), trace.last_answer())).or_default() += 1;
        let mut seen = alloc::collections::BTreeSet::new();
        for s in &trace.steps {
            if seen.insert(s.node.as_str()) {
                *report.per_node.entry(s.node.clone()).or_default() += 1;
            }
        }
        report.cases.push(ErrorCase { record_id: id.clone(), kind, outcome: trace.outcome, trace: trace.clone() });
    }
    report.groups = groups
        .into_iter()
        .map(|((kind, outcome, last_node, answer), count)| ErrorGroup { kind, outcome, last_node, answer, count })
        .collect();
    report.groups.sort_by(|a, b| b.count.cmp(&a.count));
    Ok(report)
}
