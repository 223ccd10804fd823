use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{AtomKind, Pos, ProcedureGraph, Target, Terminal};
use crate::ontology::Ontology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    MissingStart { start: String },
    DanglingTarget { node: String, target: String },
    Cycle { path: Vec<String> },
    Unreachable { node: String },
    TerminalUnreachable { terminal: Terminal },
    UnresolvedName { node: String, atom: String, name: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub pos: Option<Pos>,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    fn error(pos: Option<Pos>, kind: DiagnosticKind) -> Self {
        Diagnostic { severity: Severity::Error, pos, kind }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(pos) = self.pos {
            write!(f, "{pos}: ")?;
        }
        f.write_str(match self.severity {
            Severity::Warning => "warning: ",
            Severity::Error => "error: ",
        })?;
        match &self.kind {
            DiagnosticKind::MissingStart { start } => write!(f, "start node `{start}` is not defined"),
            DiagnosticKind::DanglingTarget { node, target } => {
                write!(f, "node `{node}` points at undefined node `{target}`")
            }
            DiagnosticKind::Cycle { path } => write!(f, "cycle: {}", path.join(" -> ")),
            DiagnosticKind::Unreachable { node } => write!(f, "node `{node}` is unreachable from the start node"),
            DiagnosticKind::TerminalUnreachable { terminal } => {
                let t = match terminal {
                    Terminal::Confirm => "confirm",
                    Terminal::Exclude => "exclude",
                };
                write!(f, "no path reaches `{t}`")
            }
            DiagnosticKind::UnresolvedName { node, atom, name } => {
                write!(f, "node `{node}`: unknown {atom} name \"{name}\"")
            }
        }
    }
}

/// Static checks on a parsed graph. Name resolution runs only for the
/// vocabularies supplied: symptoms against `ontology`, findings and flags
/// against `findings`. An empty result means the graph is valid; warnings
/// alone do not make it invalid.
pub fn validate(graph: &ProcedureGraph, ontology: Option<&Ontology>, findings: Option<&BTreeSet<String>>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let start_known = graph.nodes.contains_key(&graph.start);
    if !start_known {
        out.push(Diagnostic::error(Some(graph.start_pos.0), DiagnosticKind::MissingStart { start: graph.start.clone() }));
    }
    for node in graph.nodes.values() {
        for (target, pos) in [(&node.yes, node.span.yes), (&node.no, node.span.no)] {
            if let Target::Node(t) = target {
                if !graph.nodes.contains_key(t) {
                    out.push(Diagnostic::error(
                        Some(pos),
                        DiagnosticKind::DanglingTarget { node: node.id.clone(), target: t.clone() },
                    ));
                }
            }
        }
    }
    for path in find_cycles(graph) {
        let pos = graph.nodes.get(&path[0]).map(|n| n.span.node);
        out.push(Diagnostic::error(pos, DiagnosticKind::Cycle { path }));
    }
    if start_known {
        let mut seen = BTreeSet::new();
        let mut terminals = BTreeSet::new();
        let mut stack = vec![graph.start.as_str()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let Some(node) = graph.nodes.get(id) else { continue };
            for t in [&node.yes, &node.no] {
                match t {
                    Target::Node(next) => stack.push(next),
                    Target::Terminal(term) => {
                        terminals.insert(*term);
                    }
                }
            }
        }
        for node in graph.nodes.values() {
            if !seen.contains(node.id.as_str()) {
                out.push(Diagnostic::error(Some(node.span.node), DiagnosticKind::Unreachable { node: node.id.clone() }));
            }
        }
        for term in [Terminal::Confirm, Terminal::Exclude] {
            if !terminals.contains(&term) {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    pos: None,
                    kind: DiagnosticKind::TerminalUnreachable { terminal: term },
                });
            }
        }
    }
    for node in graph.nodes.values() {
        for atom in node.when.atoms() {
            let (kind, known) = match &atom.kind {
                AtomKind::Symptom { name } => ("symptom", ontology.map(|o| o.lookup(name).is_some())),
                AtomKind::Finding { name, .. } => ("finding", findings.map(|f| f.contains(name))),
                AtomKind::Flag { name } => ("flag", findings.map(|f| f.contains(name))),
            };
            if known == Some(false) {
                out.push(Diagnostic::error(
                    Some(node.span.node),
                    DiagnosticKind::UnresolvedName { node: node.id.clone(), atom: kind.into(), name: atom.name().into() },
                ));
            }
        }
    }
    out
}

/// One cycle per back edge found by a depth-first search, each listed from its
/// entry node and closed by repeating it.
fn find_cycles(graph: &ProcedureGraph) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    let ids: Vec<&str> = graph.nodes.keys().map(String::as_str).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let succ: Vec<Vec<usize>> = graph
        .nodes
        .values()
        .map(|n| {
            [&n.yes, &n.no]
                .into_iter()
                .filter_map(|t| match t {
                    Target::Node(id) => index.get(id.as_str()).copied(),
                    Target::Terminal(_) => None,
                })
                .collect()
        })
        .collect();
    let mut mark = vec![Mark::Fresh; ids.len()];
    let mut cycles = Vec::new();
    for root in 0..ids.len() {
        if mark[root] != Mark::Fresh {
            continue;
        }
        let mut path: Vec<usize> = vec![root];
        let mut cursor: Vec<usize> = vec![0];
        mark[root] = Mark::Active;
        while let Some(&v) = path.last() {
            let k = cursor.last().copied().unwrap_or(0);
            if k < succ[v].len() {
                if let Some(c) = cursor.last_mut() {
                    *c += 1;
                }
                let w = succ[v][k];
                match mark[w] {
                    Mark::Fresh => {
                        mark[w] = Mark::Active;
                        path.push(w);
                        cursor.push(0);
                    }
                    Mark::Active => {
                        let from = path.iter().position(|&p| p == w).unwrap_or(0);
                        let mut cycle: Vec<String> = path[from..].iter().map(|&i| String::from(ids[i])).collect();
                        cycle.push(String::from(ids[w]));
                        cycles.push(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                path.pop();
                cursor.pop();
            }
        }
    }
    cycles
}

impl ProcedureGraph {
    /// Node ids in an order where every edge points forward, or `None` if the
    /// graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for n in self.nodes.values() {
            for t in [&n.yes, &n.no] {
                if let Target::Node(id) = t {
                    if let Some(d) = indegree.get_mut(id.as_str()) {
                        *d += 1;
                    }
                }
            }
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
        let mut order = Vec::new();
        while let Some(id) = ready.pop() {
            order.push(String::from(id));
            let n = &self.nodes[id];
            for t in [&n.yes, &n.no] {
                if let Target::Node(next) = t {
                    if let Some(d) = indegree.get_mut(next.as_str()) {
                        *d -= 1;
                        if *d == 0 {
                            ready.push(next.as_str());
                        }
                    }
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Number of questions on the longest start-to-terminal path, if acyclic.
    pub fn longest_path(&self) -> Option<usize> {
        let order = self.topological_order()?;
        let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
        for id in order.iter().rev() {
            let n = &self.nodes[id];
            let d = [&n.yes, &n.no]
                .into_iter()
                .map(|t| match t {
                    Target::Node(next) => depth.get(next.as_str()).copied().unwrap_or(0),
                    Target::Terminal(_) => 0,
                })
                .max()
                .unwrap_or(0);
            depth.insert(id, d + 1);
        }
        depth.get(self.start.as_str()).copied()
    }
}

/// Whether any diagnostic is an error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
