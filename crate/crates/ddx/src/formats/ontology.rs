//! Ontology files: one node per line, `layer<TAB>name<TAB>parent_or_dash`.
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use ddx_core::ontology::{Ontology, OntologyEntry};

use crate::error::{Error, Result};

pub fn parse_ontology(text: &str, path: &Path) -> Result<Ontology> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [layer, name, parent] = fields[..] else {
            return Err(Error::format(path, i + 1, format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let layer: u8 = layer
            .trim()
            .parse()
            .map_err(|_| Error::format(path, i + 1, format!("layer `{layer}` is not 1 or 2")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::format(path, i + 1, "empty symptom name"));
        }
        let parent = match parent.trim() {
            "-" | "" => None,
            p => Some(p.to_string()),
        };
        entries.push(OntologyEntry { layer, name: name.into(), parent });
    }
    Ok(Ontology::from_entries(&entries)?)
}

pub fn render_ontology(ontology: &Ontology) -> String {
    let mut out = String::from("# layer\tname\tparent\n");
    for e in ontology.entries() {
        out.push_str(&format!("{}\t{}\t{}\n", e.layer, e.name, e.parent.as_deref().unwrap_or("-")));
    }
    out
}

pub fn load_ontology(path: &Path) -> Result<Ontology> {
    parse_ontology(&super::read(path)?, path)
}

pub fn save_ontology(ontology: &Ontology, path: &Path) -> Result<()> {
    super::write(path, &render_ontology(ontology))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddx_core::ontology::{OntologyError, SymptomId};
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Ontology> {
        parse_ontology(text, Path::new("test.tsv"))
    }

    #[test]
    fn minimal_file() {
        let o = parse("1\tfever\t-\n").unwrap();
        assert_eq!((o.n_first(), o.len()), (1, 1));
    }

    #[test]
    fn comments_and_children() {
        let o = parse("# symptoms\n1\tpain\t-\n\n2\tchest pain\tpain\n1\tcough\t-\n").unwrap();
        assert_eq!((o.n_first(), o.len()), (2, 3));
        assert_eq!(o.lookup("chest pain"), Some(SymptomId(2)));
        assert_eq!(o.parent_of(SymptomId(2)).unwrap(), Some(SymptomId(0)));
    }

    #[test]
    fn paper_scale_counts() {
        let mut text = String::new();
        for i in 0..28 {
            text.push_str(&format!("1\tc{i}\t-\n"));
        }
        for j in 0..689 {
            text.push_str(&format!("2\ts{j}\tc{}\n", j % 28));
        }
        let o = parse(&text).unwrap();
        assert_eq!((o.n_first(), o.len()), (28, 717));
    }

    #[test]
    fn broken_reference_is_rejected() {
        let err = parse("1\tpain\t-\n2\tache\tmissing\n").unwrap_err();
        assert!(matches!(err, Error::Ontology(OntologyError::UnknownParent { .. })));
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = parse("1\tpain\t-\n1 pain -\n").unwrap_err();
        assert!(err.to_string().contains("test.tsv:2"), "{err}");
        assert!(parse("x\tpain\t-\n").is_err());
        assert!(matches!(
            parse("1\tpain\t-\n1\tpain\t-\n").unwrap_err(),
            Error::Ontology(OntologyError::DuplicateName { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(n_first in 1usize..8, children in 0usize..5) {
            let o = Ontology::synthetic(n_first, children, 0).unwrap();
            prop_assert_eq!(parse(&render_ontology(&o)).unwrap(), o);
        }
    }
}
