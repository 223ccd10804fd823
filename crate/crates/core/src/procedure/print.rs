use alloc::format;
use alloc::string::String;
use core::fmt::Write as _;

use super::{Atom, AtomKind, Predicate, ProcedureGraph};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn atom(a: &Atom) -> String {
    let mut s = match &a.kind {
        AtomKind::Symptom { name } => format!("symptom({})", quote(name)),
        AtomKind::Flag { name } => format!("flag({})", quote(name)),
        AtomKind::Finding { name, cmp, value } => format!("finding({}) {} {:?}", quote(name), cmp.symbol(), value),
    };
    if a.default_yes {
        s.push_str("?yes");
    }
    s
}

fn predicate(p: &Predicate) -> String {
    match p {
        Predicate::Atom(a) => atom(a),
        Predicate::Not(inner) => match **inner {
            Predicate::And(_) | Predicate::Or(_) => format!("!({})", predicate(inner)),
            _ => format!("!{}", predicate(inner)),
        },
        Predicate::And(ps) => join(ps, " && ", |c| matches!(c, Predicate::Or(_) | Predicate::And(_))),
        Predicate::Or(ps) => join(ps, " || ", |c| matches!(c, Predicate::Or(_))),
    }
}

fn join(ps: &[Predicate], sep: &str, needs_parens: impl Fn(&Predicate) -> bool) -> String {
    let mut out = String::new();
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        if needs_parens(p) {
            let _ = write!(out, "({})", predicate(p));
        } else {
            out.push_str(&predicate(p));
        }
    }
    out
}

/// Renders a graph as source text. Nodes are emitted in id order so equal
/// graphs print identically.
pub fn serialize(graph: &ProcedureGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "procedure {} for {} {{", quote(&graph.name), quote(&graph.disease_label));
    let _ = writeln!(out, "  start: {}", graph.start);
    for node in graph.nodes.values() {
        let _ = writeln!(out, "  node {} {{", node.id);
        let _ = writeln!(out, "    ask: {}", quote(&node.ask));
        let _ = writeln!(out, "    when: {}", predicate(&node.when));
        let _ = writeln!(out, "    yes -> {}", node.yes);
        let _ = writeln!(out, "    no -> {}", node.no);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedure::parse;
    use crate::procedure::testing::{random_graph, HEART_FAILURE};
    use crate::rng;
    use alloc::vec::Vec;

    #[test]
    fn round_trips() {
        let g = parse(HEART_FAILURE).unwrap();
        let text = serialize(&g);
        assert_eq!(parse(&text).unwrap(), g);
        assert_eq!(serialize(&parse(&text).unwrap()), text);
        let minimal = parse(r#"procedure "a \"b\"" for "d" { start: x node x { ask: "q" when: flag("f") yes -> confirm no -> exclude } }"#).unwrap();
        assert_eq!(parse(&serialize(&minimal)).unwrap(), minimal);
    }

    #[test]
    fn random_graphs_round_trip() {
        let mut r = rng::seeded(12);
        let symptoms: Vec<String> = (0..5).map(|i| alloc::format!("s{i}")).collect();
        for n in 1..40 {
            let g = random_graph(&mut r, n % 9 + 1, &symptoms, &["bnp", "lvef"]);
            let text = serialize(&g);
            assert_eq!(parse(&text).unwrap(), g, "{text}");
        }
    }

    #[test]
    fn values_print_exactly() {
        for v in [0.1, -3.0, 1e-12, 125.0, 1.0 / 3.0, 6.02e23] {
            let a = Atom::finding("x", crate::procedure::Comparison::Ge, v);
            let text = atom(&a);
            let num: f64 = text.rsplit(' ').next().unwrap().parse().unwrap();
            assert_eq!(num, v);
        }
    }
}
