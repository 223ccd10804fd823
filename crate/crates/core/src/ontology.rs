//! Two-layer symptom hierarchy.
//!
//! First-layer symptoms are general complaints; every second-layer symptom is
//! affiliated with exactly one first-layer parent. Ids are dense and laid out
//! first-layer block first, so `id < n_first()` tells the layer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymptomId(pub usize);

impl SymptomId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SymptomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    First,
    Second,
}

impl Layer {
    pub fn number(self) -> u8 {
        match self {
            Layer::First => 1,
            Layer::Second => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymptomNode {
    pub id: SymptomId,
    pub name: String,
    pub layer: Layer,
    pub parent: Option<SymptomId>,
    pub children: Vec<SymptomId>,
}

/// One declared entry, before indices are assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OntologyEntry {
    pub layer: u8,
    pub name: String,
    pub parent: Option<String>,
}

impl OntologyEntry {
    pub fn first(name: impl Into<String>) -> Self {
        OntologyEntry { layer: 1, name: name.into(), parent: None }
    }

    pub fn second(name: impl Into<String>, parent: impl Into<String>) -> Self {
        OntologyEntry { layer: 2, name: name.into(), parent: Some(parent.into()) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("ontology has no symptoms")]
    Empty,
    #[error("entry {index}: layer must be 1 or 2, got {layer}")]
    InvalidLayer { index: usize, layer: u8 },
    #[error("duplicate symptom name `{name}`")]
    DuplicateName { name: String },
    #[error("first-layer symptom `{name}` must not have a parent")]
    FirstLayerWithParent { name: String },
    #[error("second-layer symptom `{name}` has no parent")]
    MissingParent { name: String },
    #[error("symptom `{child}` names unknown parent `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error("symptom `{child}` names `{parent}` as parent, but layer-2 symptoms cannot have children")]
    ParentNotFirstLayer { child: String, parent: String },
    #[error("symptom id {0} is out of range")]
    OutOfRange(usize),
    #[error("invalid generator arguments: {0}")]
    InvalidArguments(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ontology {
    nodes: Vec<SymptomNode>,
    n_first: usize,
    by_name: BTreeMap<String, SymptomId>,
}

impl Ontology {
    /// Builds and validates an ontology from declared entries.
    ///
    /// A parent must be declared before its children. Indices are assigned
    /// first-layer entries first, each block in declaration order.
    pub fn from_entries(entries: &[OntologyEntry]) -> Result<Self, OntologyError> {
        if entries.is_empty() {
            return Err(OntologyError::Empty);
        }
        let mut layer_of: BTreeMap<&str, u8> = BTreeMap::new();
        for (index, e) in entries.iter().enumerate() {
            match e.layer {
                1 => {
                    if e.parent.is_some() {
                        return Err(OntologyError::FirstLayerWithParent { name: e.name.clone() });
                    }
                }
                2 => {
                    let parent = e
                        .parent
                        .as_deref()
                        .ok_or_else(|| OntologyError::MissingParent { name: e.name.clone() })?;
                    match layer_of.get(parent) {
                        None => {
                            return Err(OntologyError::UnknownParent {
                                child: e.name.clone(),
                                parent: parent.into(),
                            })
                        }
                        Some(2) => {
                            return Err(OntologyError::ParentNotFirstLayer {
                                child: e.name.clone(),
                                parent: parent.into(),
                            })
                        }
                        Some(_) => {}
                    }
                }
                layer => return Err(OntologyError::InvalidLayer { index, layer }),
            }
            if layer_of.insert(e.name.as_str(), e.layer).is_some() {
                return Err(OntologyError::DuplicateName { name: e.name.clone() });
            }
        }

        let firsts: Vec<&OntologyEntry> = entries.iter().filter(|e| e.layer == 1).collect();
        let seconds: Vec<&OntologyEntry> = entries.iter().filter(|e| e.layer == 2).collect();
        let n_first = firsts.len();
        let mut by_name = BTreeMap::new();
        let mut nodes = Vec::with_capacity(entries.len());
        for (i, e) in firsts.iter().enumerate() {
            by_name.insert(e.name.clone(), SymptomId(i));
            nodes.push(SymptomNode {
                id: SymptomId(i),
                name: e.name.clone(),
                layer: Layer::First,
                parent: None,
                children: Vec::new(),
            });
        }
        for (k, e) in seconds.iter().enumerate() {
            let id = SymptomId(n_first + k);
            // Parent existence was checked above.
            let parent = by_name[e.parent.as_deref().unwrap_or_default()];
            by_name.insert(e.name.clone(), id);
            nodes[parent.0].children.push(id);
            nodes.push(SymptomNode {
                id,
                name: e.name.clone(),
                layer: Layer::Second,
                parent: Some(parent),
                children: Vec::new(),
            });
        }
        Ok(Ontology { nodes, n_first, by_name })
    }

    /// Entries in id order; feeding them back to [`Ontology::from_entries`]
    /// reproduces this ontology.
    pub fn entries(&self) -> Vec<OntologyEntry> {
        self.nodes
            .iter()
            .map(|n| OntologyEntry {
                layer: n.layer.number(),
                name: n.name.clone(),
                parent: n.parent.map(|p| self.nodes[p.0].name.clone()),
            })
            .collect()
    }

    /// Generates a uniform synthetic ontology: categories `cat<i>` each with
    /// `children_per_first` symptoms `sym<i>.<j>`.
    ///
    /// The structure is fully determined by the sizes; the seed is accepted so
    /// callers can treat all generators uniformly.
    pub fn synthetic(
        n_first: usize,
        children_per_first: usize,
        _seed: u64,
    ) -> Result<Self, OntologyError> {
        if n_first == 0 {
            return Err(OntologyError::InvalidArguments("n_first must be at least 1".into()));
        }
        let mut entries = Vec::with_capacity(n_first * (1 + children_per_first));
        for i in 0..n_first {
            entries.push(OntologyEntry::first(format!("cat{i}")));
        }
        for i in 0..n_first {
            for j in 0..children_per_first {
                entries.push(OntologyEntry::second(format!("sym{i}.{j}"), format!("cat{i}")));
            }
        }
        Self::from_entries(&entries)
    }

    /// Number of symptoms (M).
    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of first-layer symptoms (F).
    #[inline]
    pub fn n_first(&self) -> usize {
        self.n_first
    }

    pub fn nodes(&self) -> &[SymptomNode] {
        &self.nodes
    }

    pub fn node(&self, id: SymptomId) -> Result<&SymptomNode, OntologyError> {
        self.nodes.get(id.0).ok_or(OntologyError::OutOfRange(id.0))
    }

    #[inline]
    pub fn is_first_layer(&self, id: SymptomId) -> bool {
        id.0 < self.n_first
    }

    pub fn parent_of(&self, id: SymptomId) -> Result<Option<SymptomId>, OntologyError> {
        Ok(self.node(id)?.parent)
    }

    pub fn children_of(&self, id: SymptomId) -> Result<&[SymptomId], OntologyError> {
        Ok(&self.node(id)?.children)
    }

    pub fn lookup(&self, name: &str) -> Option<SymptomId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: SymptomId) -> &str {
        &self.nodes[id.0].name
    }

    /// Parent of a second-layer symptom without bounds reporting; `None` for
    /// first-layer ids.
    #[inline]
    pub(crate) fn parent_unchecked(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent.map(|p| p.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn minimal_ontology() {
        let o = Ontology::from_entries(&[OntologyEntry::first("pain")]).unwrap();
        assert_eq!((o.n_first(), o.len()), (1, 1));
    }

    #[test]
    fn reference_scale_counts() {
        let mut entries = Vec::new();
        for i in 0..28 {
            entries.push(OntologyEntry::first(format!("c{i}")));
        }
        for k in 0..689 {
            entries.push(OntologyEntry::second(format!("s{k}"), format!("c{}", k % 28)));
        }
        let o = Ontology::from_entries(&entries).unwrap();
        assert_eq!((o.n_first(), o.len()), (28, 717));
    }

    #[test]
    fn broken_references_are_rejected() {
        let err = Ontology::from_entries(&[
            OntologyEntry::first("a"),
            OntologyEntry::second("b", "missing"),
        ])
        .unwrap_err();
        assert!(matches!(err, OntologyError::UnknownParent { .. }));

        let err = Ontology::from_entries(&[
            OntologyEntry::first("a"),
            OntologyEntry::second("b", "a"),
            OntologyEntry::second("c", "b"),
        ])
        .unwrap_err();
        assert!(matches!(err, OntologyError::ParentNotFirstLayer { .. }));

        let err = Ontology::from_entries(&[OntologyEntry::first("a"), OntologyEntry::first("a")])
            .unwrap_err();
        assert!(matches!(err, OntologyError::DuplicateName { .. }));
    }

    #[test]
    fn parent_must_precede_child() {
        let err = Ontology::from_entries(&[
            OntologyEntry::second("b", "a"),
            OntologyEntry::first("a"),
        ])
        .unwrap_err();
        assert!(matches!(err, OntologyError::UnknownParent { .. }));
    }

    #[test]
    fn ids_are_first_layer_first() {
        let o = Ontology::from_entries(&[
            OntologyEntry::first("a"),
            OntologyEntry::second("a1", "a"),
            OntologyEntry::first("b"),
            OntologyEntry::second("b1", "b"),
        ])
        .unwrap();
        assert_eq!(o.lookup("b"), Some(SymptomId(1)));
        assert_eq!(o.lookup("a1"), Some(SymptomId(2)));
        assert_eq!(o.children_of(SymptomId(1)).unwrap(), &[SymptomId(3)]);
        assert_eq!(o.parent_of(SymptomId(0)).unwrap(), None);
        assert_eq!(o.parent_of(SymptomId(3)).unwrap(), Some(SymptomId(1)));
        assert!(o.parent_of(SymptomId(4)).is_err());
    }

    #[test]
    fn synthetic_sizes_and_determinism() {
        let o = Ontology::synthetic(10, 5, 7).unwrap();
        assert_eq!((o.n_first(), o.len()), (10, 60));
        assert_eq!(o, Ontology::synthetic(10, 5, 7).unwrap());
        let o = Ontology::synthetic(1, 0, 0).unwrap();
        assert_eq!((o.n_first(), o.len()), (1, 1));
        assert!(Ontology::synthetic(0, 3, 0).is_err());
        assert_eq!(o.entries(), vec![OntologyEntry::first("cat0")]);
    }

    proptest! {
        #[test]
        fn hierarchy_links_are_symmetric(sizes in prop::collection::vec(0usize..5, 1..8)) {
            let mut entries = Vec::new();
            for i in 0..sizes.len() {
                entries.push(OntologyEntry::first(format!("c{i}")));
            }
            // Interleave children so declaration order differs from id order.
            let max = sizes.iter().copied().max().unwrap_or(0);
            for j in 0..max {
                for (i, &n) in sizes.iter().enumerate() {
                    if j < n {
                        entries.push(OntologyEntry::second(format!("c{i}.{j}"), format!("c{i}")));
                    }
                }
            }
            let o = Ontology::from_entries(&entries).unwrap();
            prop_assert_eq!(o.len(), sizes.len() + sizes.iter().sum::<usize>());
            let mut ids: Vec<usize> = o.nodes().iter().map(|n| n.id.0).collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..o.len()).collect::<Vec<_>>());
            for node in o.nodes() {
                match node.layer {
                    Layer::First => {
                        prop_assert!(node.parent.is_none());
                    }
                    Layer::Second => {
                        let p = node.parent.unwrap();
                        prop_assert!(o.is_first_layer(p));
                        prop_assert!(o.children_of(p).unwrap().contains(&node.id));
                        prop_assert!(node.children.is_empty());
                    }
                }
            }
            prop_assert_eq!(Ontology::from_entries(&o.entries()).unwrap(), o);
        }
    }
}
