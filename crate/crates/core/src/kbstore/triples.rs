use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// Role counts for a single relation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub head: BTreeMap<String, usize>,
    pub tail: BTreeMap<String, usize>,
}

impl RoleCounts {
    pub fn head_count(&self, entity: &str) -> usize {
        self.head.get(entity).copied().unwrap_or(0)
    }

    pub fn tail_count(&self, entity: &str) -> usize {
        self.tail.get(entity).copied().unwrap_or(0)
    }

    /// Entities seen as head, in id order.
    pub fn head_role(&self) -> impl Iterator<Item = &str> {
        self.head.keys().map(String::as_str)
    }

    pub fn tail_role(&self) -> impl Iterator<Item = &str> {
        self.tail.keys().map(String::as_str)
    }
}

/// Per-relation head/tail counts over a deduplicated triple set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationStats {
    relations: BTreeMap<String, RoleCounts>,
}

impl RelationStats {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut relations: BTreeMap<String, RoleCounts> = BTreeMap::new();
        for t in triples {
            let rc = relations.entry(t.relation.clone()).or_default();
            *rc.head.entry(t.head.clone()).or_insert(0) += 1;
            *rc.tail.entry(t.tail.clone()).or_insert(0) += 1;
        }
        RelationStats { relations }
    }

    pub fn get(&self, relation: &str) -> Option<&RoleCounts> {
        self.relations.get(relation)
    }

    pub fn head_count(&self, relation: &str, entity: &str) -> usize {
        self.get(relation).map_or(0, |rc| rc.head_count(entity))
    }

    pub fn tail_count(&self, relation: &str, entity: &str) -> usize {
        self.get(relation).map_or(0, |rc| rc.tail_count(entity))
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }
}

/// Deduplicated, ordered set of relation triples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripleSet {
    triples: BTreeSet<Triple>,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Triples grouped by relation, each group in triple order.
    pub fn by_relation(&self) -> BTreeMap<&str, Vec<&Triple>> {
        let mut out: BTreeMap<&str, Vec<&Triple>> = BTreeMap::new();
        for t in &self.triples {
            out.entry(t.relation.as_str()).or_default().push(t);
        }
        out
    }
}

impl FromIterator<Triple> for TripleSet {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        TripleSet {
            triples: iter.into_iter().collect(),
        }
    }
}

/// Parses `head<TAB>relation<TAB>tail` rows. Duplicate rows collapse.
pub fn parse_triples<R: BufRead>(
    reader: R,
    source_name: &str,
) -> Result<(TripleSet, RelationStats)> {
    let mut triples = BTreeSet::new();
    for line in textio::numbered_lines(reader, source_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                source_name,
                n,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(source_name, n, "empty field"));
        }
        triples.insert(Triple::new(fields[0], fields[1], fields[2]));
    }
    let set = TripleSet { triples };
    let stats = RelationStats::from_triples(set.iter());
    Ok((set, stats))
}

pub fn ingest_triples(path: &Path) -> Result<(TripleSet, RelationStats)> {
    parse_triples(textio::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<(TripleSet, RelationStats)> {
        parse_triples(s.as_bytes(), "fixture")
    }

    #[test]
    fn counts_roles_by_hand() {
        let (set, stats) = parse("A\tcountry\tX\nB\tcountry\tX\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(stats.tail_count("country", "X"), 2);
        assert_eq!(stats.head_count("country", "A"), 1);
        assert_eq!(stats.head_count("country", "X"), 0);
    }

    #[test]
    fn empty_file_is_empty_store() {
        let (set, stats) = parse("").unwrap();
        assert!(set.is_empty());
        assert_eq!(stats.relations().count(), 0);
        assert_eq!(stats.tail_count("country", "X"), 0);
    }

    #[test]
    fn duplicate_lines_collapse() {
        let (set, stats) = parse("A\tcountry\tX\nA\tcountry\tX\n").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(stats.tail_count("country", "X"), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("A\tcountry\tX\nB\tcountry\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn self_relations_are_kept() {
        let (set, stats) = parse("A\tsame\tA\n").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(stats.head_count("same", "A"), 1);
        assert_eq!(stats.tail_count("same", "A"), 1);
    }
}
