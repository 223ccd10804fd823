//! Decision procedures for differential diagnosis.
//!
//! A procedure is a rooted DAG of yes/no question nodes whose edges end in the
//! global terminals `confirm` and `exclude`. Source text looks like
//!
//! ```text
//! procedure "heart failure" for "heart_failure" {
//!   start: n1
//!   node n1 {
//!     ask: "Are you short of breath?"
//!     when: symptom("dyspnea")
//!     yes -> n2
//!     no -> exclude
//!   }
//!   node n2 {
//!     ask: "Is the BNP raised?"
//!     when: finding("bnp") >= 125 && !flag("ecg_normal")?yes
//!     yes -> confirm
//!     no -> exclude
//!   }
//! }
//! ```

mod interpret;
mod lexer;
mod parser;
mod print;
mod validate;

pub use interpret::{run, truth_table_outcome, InterpretError, Outcome, RunTrace, TraceStep, MAX_QUESTIONS};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, ParseError};
pub use print::serialize;
pub use validate::{has_errors, validate, Diagnostic, DiagnosticKind, Severity};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cohort::PatientRecord;
use crate::ontology::Ontology;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
    Ne,
}

impl Comparison {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Ge => lhs >= rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Lt => "<",
            Comparison::Eq => "==",
            Comparison::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AtomKind {
    Symptom { name: String },
    Finding { name: String, cmp: Comparison, value: f64 },
    Flag { name: String },
}

/// A leaf question. `default_yes` is the answer used when the record says
/// nothing about the name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub default_yes: bool,
}

impl Atom {
    pub fn symptom(name: impl Into<String>) -> Self {
        Atom { kind: AtomKind::Symptom { name: name.into() }, default_yes: false }
    }

    pub fn finding(name: impl Into<String>, cmp: Comparison, value: f64) -> Self {
        Atom { kind: AtomKind::Finding { name: name.into(), cmp, value }, default_yes: false }
    }

    pub fn flag(name: impl Into<String>) -> Self {
        Atom { kind: AtomKind::Flag { name: name.into() }, default_yes: false }
    }

    pub fn default_yes(mut self, yes: bool) -> Self {
        self.default_yes = yes;
        self
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            AtomKind::Symptom { name } | AtomKind::Finding { name, .. } | AtomKind::Flag { name } => name,
        }
    }

    /// Answers the atom from the record. A symptom is "yes" when its oracle
    /// bit is set and "no" when explicitly denied; an unmentioned symptom, a
    /// missing finding and an unknown name all take the default.
    pub fn evaluate(&self, record: &PatientRecord, ontology: &Ontology) -> bool {
        match &self.kind {
            AtomKind::Symptom { name } => match ontology.lookup(name) {
                Some(id) => {
                    if record.oracle_symptoms.get(id.0).copied().unwrap_or(false) {
                        true
                    } else if record.explicit_denials.get(id.0).copied().unwrap_or(false) {
                        false
                    } else {
                        self.default_yes
                    }
                }
                None => self.default_yes,
            },
            AtomKind::Finding { name, cmp, value } => match record.findings.get(name) {
                Some(&v) => cmp.apply(v, *value),
                None => self.default_yes,
            },
            AtomKind::Flag { name } => match record.findings.get(name) {
                Some(&v) => v != 0.0,
                None => self.default_yes,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Predicate {
    Atom(Atom),
    Not(alloc::boxed::Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    pub fn evaluate(&self, record: &PatientRecord, ontology: &Ontology) -> bool {
        match self {
            Predicate::Atom(a) => a.evaluate(record, ontology),
            Predicate::Not(p) => !p.evaluate(record, ontology),
            Predicate::And(ps) => ps.iter().all(|p| p.evaluate(record, ontology)),
            Predicate::Or(ps) => ps.iter().any(|p| p.evaluate(record, ontology)),
        }
    }

    /// Every atom in source order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Predicate::Atom(a) => out.push(a),
            Predicate::Not(p) => p.collect_atoms(out),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.collect_atoms(out)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Confirm,
    Exclude,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Node(String),
    Terminal(Terminal),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(id) => f.write_str(id),
            Target::Terminal(Terminal::Confirm) => f.write_str("confirm"),
            Target::Terminal(Terminal::Exclude) => f.write_str("exclude"),
        }
    }
}

/// Source positions of a node, kept out of structural equality.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct NodeSpan {
    pub node: Pos,
    pub yes: Pos,
    pub no: Pos,
}

impl PartialEq for NodeSpan {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub id: String,
    pub ask: String,
    pub when: Predicate,
    pub yes: Target,
    pub no: Target,
    #[serde(skip)]
    pub span: NodeSpan,
}

impl DecisionNode {
    pub fn target(&self, answer: bool) -> &Target {
        if answer {
            &self.yes
        } else {
            &self.no
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureGraph {
    pub name: String,
    pub disease_label: String,
    pub start: String,
    pub nodes: BTreeMap<String, DecisionNode>,
    #[serde(skip)]
    pub start_pos: SpanPos,
}

/// Position of the `start` declaration, ignored by equality.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SpanPos(pub Pos);

impl PartialEq for SpanPos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl ProcedureGraph {
    pub fn node(&self, id: &str) -> Option<&DecisionNode> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use rand::Rng as _;

    use crate::rng::Rng;

    /// A random valid DAG: node `n{i}` only points at higher-numbered nodes or
    /// terminals, and every node is reached from its predecessor.
    pub fn random_graph(rng: &mut Rng, n: usize, symptoms: &[String], findings: &[&str]) -> ProcedureGraph {
        let mut nodes = BTreeMap::new();
        for i in 0..n {
            let pick_target = |rng: &mut Rng, forced: bool| -> Target {
                if i + 1 < n && (forced || rng.gen_bool(0.5)) {
                    let j = if forced { i + 1 } else { rng.gen_range(i + 1..n) };
                    Target::Node(format!("n{j}"))
                } else if rng.gen_bool(0.5) {
                    Target::Terminal(Terminal::Confirm)
                } else {
                    Target::Terminal(Terminal::Exclude)
                }
            };
            let forced_yes = rng.gen_bool(0.5);
            let yes = pick_target(rng, forced_yes);
            let no = pick_target(rng, !forced_yes);
            let when = random_predicate(rng, 2, symptoms, findings);
            let id = format!("n{i}");
            nodes.insert(
                id.clone(),
                DecisionNode { ask: format!("Question {i}?"), id, when, yes, no, span: NodeSpan::default() },
            );
        }
        ProcedureGraph {
            name: "random".to_string(),
            disease_label: "d0".to_string(),
            start: "n0".to_string(),
            nodes,
            start_pos: SpanPos::default(),
        }
    }

    pub fn random_predicate(rng: &mut Rng, depth: usize, symptoms: &[String], findings: &[&str]) -> Predicate {
        let choice = if depth == 0 { 0 } else { rng.gen_range(0..4) };
        match choice {
            0 => {
                let a = match rng.gen_range(0..3) {
                    0 => Atom::symptom(symptoms[rng.gen_range(0..symptoms.len())].clone()),
                    1 => {
                        let cmps = [Comparison::Ge, Comparison::Le, Comparison::Gt, Comparison::Lt, Comparison::Eq, Comparison::Ne];
                        let v = (rng.gen_range(-20..200) as f64) * 0.5;
                        Atom::finding(findings[rng.gen_range(0..findings.len())], cmps[rng.gen_range(0..6)], v)
                    }
                    _ => Atom::flag(findings[rng.gen_range(0..findings.len())]),
                };
                Predicate::Atom(a.default_yes(rng.gen_bool(0.2)))
            }
            1 => Predicate::Not(alloc::boxed::Box::new(random_predicate(rng, depth - 1, symptoms, findings))),
            2 => Predicate::And((0..rng.gen_range(2..4)).map(|_| random_predicate(rng, depth - 1, symptoms, findings)).collect()),
            _ => Predicate::Or((0..rng.gen_range(2..4)).map(|_| random_predicate(rng, depth - 1, symptoms, findings)).collect()),
        }
    }

    pub fn chain(n: usize) -> ProcedureGraph {
        let mut nodes = BTreeMap::new();
        for i in 0..n {
            let id = format!("c{i:03}");
            let yes = if i + 1 < n { Target::Node(format!("c{:03}", i + 1)) } else { Target::Terminal(Terminal::Confirm) };
            nodes.insert(
                id.clone(),
                DecisionNode {
                    id,
                    ask: "Continue?".to_string(),
                    when: Predicate::Atom(Atom::flag("always").default_yes(true)),
                    yes,
                    no: Target::Terminal(Terminal::Exclude),
                    span: NodeSpan::default(),
                },
            );
        }
        ProcedureGraph {
            name: "chain".to_string(),
            disease_label: "d".to_string(),
            start: "c000".to_string(),
            nodes,
            start_pos: SpanPos::default(),
        }
    }

    pub const HEART_FAILURE: &str = r#"# Eight-question heart failure work-up.
procedure "heart failure" for "heart_failure" {
  start: symptoms
  node symptoms {
    ask: "Do you have breathlessness, ankle swelling or fatigue?"
    when: symptom("dyspnea") || symptom("edema") || symptom("fatigue")
    yes -> history
    no -> exclude
  }
  node history {
    ask: "Any history of coronary disease or hypertension?"
    when: flag("cad_history") || flag("hypertension")
    yes -> ecg
    no -> ecg
  }
  node ecg {
    ask: "Is the ECG abnormal?"
    when: flag("ecg_abnormal")?yes
    yes -> bnp
    no -> bnp
  }
  node bnp {
    ask: "Is NT-proBNP at least 125 pg/mL?"
    when: finding("bnp") >= 125
    yes -> echo
    no -> xray
  }
  node xray {
    ask: "Does the chest X-ray show congestion?"
    when: flag("xray_infiltrate")
    yes -> echo
    no -> exclude
  }
  node echo {
    ask: "Is the echocardiogram abnormal?"
    when: flag("echo_abnormal")
    yes -> lvef
    no -> exclude
  }
  node lvef {
    ask: "Is LVEF below 40%?"
    when: finding("lvef") < 40
    yes -> confirm
    no -> structural
  }
  node structural {
    ask: "Is there structural heart disease or diastolic dysfunction?"
    when: finding("lvef") <= 49 && !(finding("troponin") > 0.5)
    yes -> confirm
    no -> exclude
  }
}
"#;
}
