use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

pub const ROOT: &str = "ROOT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeInfo {
    pub parent: Option<String>,
    pub level: u8,
}

/// A rooted type tree plus per-entity type chains.
///
/// Assignments are stored closed under the parent relation and ordered
/// coarse to fine, so `chain(e)[0]` is always a level-1 type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeOntology {
    types: BTreeMap<String, TypeInfo>,
    assignments: BTreeMap<String, Vec<String>>,
}

impl TypeOntology {
    pub fn new(
        types: BTreeMap<String, TypeInfo>,
        raw_assignments: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        validate_levels(&types)?;
        let mut assignments = BTreeMap::new();
        for (entity, assigned) in raw_assignments {
            let chain = close_chain(&types, &entity, &assigned)?;
            assignments.insert(entity, chain);
        }
        Ok(TypeOntology { types, assignments })
    }

    pub fn type_info(&self, type_id: &str) -> Option<&TypeInfo> {
        self.types.get(type_id)
    }

    pub fn types(&self) -> impl Iterator<Item = (&str, &TypeInfo)> {
        self.types.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Types at `level`, in id order.
    pub fn types_at_level(&self, level: u8) -> Vec<&str> {
        self.types
            .iter()
            .filter(|(_, info)| info.level == level)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Coarse-to-fine type chain of an entity; empty when untyped.
    pub fn chain(&self, entity: &str) -> &[String] {
        self.assignments.get(entity).map_or(&[], Vec::as_slice)
    }

    pub fn finest_type(&self, entity: &str) -> Option<&str> {
        self.chain(entity).last().map(String::as_str)
    }

    pub fn type_at_level(&self, entity: &str, level: u8) -> Option<&str> {
        let idx = usize::from(level).checked_sub(1)?;
        self.chain(entity).get(idx).map(String::as_str)
    }

    pub fn typed_entities(&self) -> impl Iterator<Item = &str> {
        self.assignments.keys().map(String::as_str)
    }

    /// Entities grouped by their finest type.
    pub fn entities_by_finest_type(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (entity, chain) in &self.assignments {
            if let Some(t) = chain.last() {
                out.entry(t.as_str()).or_default().push(entity.as_str());
            }
        }
        out
    }

    /// Entities whose chain contains `type_id` at any position.
    pub fn entities_by_type(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (entity, chain) in &self.assignments {
            for t in chain {
                out.entry(t.as_str()).or_default().push(entity.as_str());
            }
        }
        out
    }
}

fn validate_levels(types: &BTreeMap<String, TypeInfo>) -> Result<()> {
    for (id, info) in types {
        match &info.parent {
            None if info.level != 1 => {
                return Err(Error::Invalid(format!(
                    "type {id} hangs off ROOT but has level {}",
                    info.level
                )))
            }
            None => {}
            Some(parent) => {
                let p = types.get(parent).ok_or_else(|| {
                    Error::Invalid(format!("type {id} has unknown parent {parent}"))
                })?;
                if info.level != p.level + 1 {
                    return Err(Error::Invalid(format!(
                        "type {id} has level {} but parent {parent} has level {}",
                        info.level, p.level
                    )));
                }
            }
        }
    }
    Ok(())
}

fn close_chain(
    types: &BTreeMap<String, TypeInfo>,
    entity: &str,
    assigned: &BTreeSet<String>,
) -> Result<Vec<String>> {
    let mut deepest: Option<(&str, u8)> = None;
    for t in assigned {
        let info = types
            .get(t)
            .ok_or_else(|| Error::Invalid(format!("entity {entity} assigned unknown type {t}")))?;
        if deepest.is_none_or(|(_, lvl)| info.level > lvl) {
            deepest = Some((t.as_str(), info.level));
        }
    }
    let Some((finest, _)) = deepest else {
        return Ok(Vec::new());
    };
    let mut chain = vec![finest.to_owned()];
    let mut cur = finest;
    while let Some(parent) = types[cur].parent.as_deref() {
        chain.push(parent.to_owned());
        cur = parent;
    }
    chain.reverse();
    if let Some(stray) = assigned.iter().find(|t| !chain.contains(t)) {
        return Err(Error::Invalid(format!(
            "entity {entity}: type {stray} is not on the chain ending at {finest}"
        )));
    }
    Ok(chain)
}

pub fn parse_ontology<R1: BufRead, R2: BufRead>(
    ontology: R1,
    ontology_name: &str,
    assignments: R2,
    assignments_name: &str,
) -> Result<TypeOntology> {
    let mut types = BTreeMap::new();
    for line in textio::numbered_lines(ontology, ontology_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, parent, level] = fields[..] else {
            return Err(Error::parse(
                ontology_name,
                n,
                "expected type, parent, level",
            ));
        };
        let level: u8 = level
            .trim()
            .parse()
            .map_err(|_| Error::parse(ontology_name, n, format!("bad level {level:?}")))?;
        if level == 0 {
            return Err(Error::parse(ontology_name, n, "levels start at 1"));
        }
        let parent = (parent != ROOT).then(|| parent.to_owned());
        if types
            .insert(id.to_owned(), TypeInfo { parent, level })
            .is_some()
        {
            return Err(Error::parse(
                ontology_name,
                n,
                format!("duplicate type {id}"),
            ));
        }
    }

    let mut raw: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for line in textio::numbered_lines(assignments, assignments_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [entity, type_id] = fields[..] else {
            return Err(Error::parse(assignments_name, n, "expected entity, type"));
        };
        if !types.contains_key(type_id) {
            return Err(Error::parse(
                assignments_name,
                n,
                format!("unknown type {type_id}"),
            ));
        }
        raw.entry(entity.to_owned())
            .or_default()
            .insert(type_id.to_owned());
    }
    TypeOntology::new(types, raw)
}

pub fn ingest_ontology(ontology_path: &Path, assignments_path: &Path) -> Result<TypeOntology> {
    parse_ontology(
        textio::open(ontology_path)?,
        &ontology_path.display().to_string(),
        textio::open(assignments_path)?,
        &assignments_path.display().to_string(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TYPES: &str = "Person\tROOT\t1\nAthlete\tPerson\t2\nCity\tPlace\t2\nPlace\tROOT\t1\n";

    fn build(assign: &str) -> Result<TypeOntology> {
        parse_ontology(TYPES.as_bytes(), "types", assign.as_bytes(), "assign")
    }

    #[test]
    fn finest_type_is_deepest() {
        let o = build("E\tPerson\nE\tAthlete\n").unwrap();
        assert_eq!(o.finest_type("E"), Some("Athlete"));
        assert_eq!(o.type_at_level("E", 1), Some("Person"));
    }

    #[test]
    fn unassigned_entity_has_no_type() {
        let o = build("E\tPerson\n").unwrap();
        assert_eq!(o.finest_type("F"), None);
        assert!(o.chain("F").is_empty());
    }

    #[test]
    fn chain_reconstructed_from_parents() {
        let o = build("E\tAthlete\n").unwrap();
        assert_eq!(o.chain("E"), ["Person".to_owned(), "Athlete".to_owned()]);
    }

    #[test]
    fn unknown_type_rejected() {
        assert!(build("E\tRobot\n").is_err());
    }

    #[test]
    fn level_inconsistency_rejected() {
        let err = parse_ontology(
            "Person\tROOT\t1\nAthlete\tPerson\t3\n".as_bytes(),
            "types",
            "".as_bytes(),
            "assign",
        );
        assert!(err.is_err());
        let err = parse_ontology("Person\tROOT\t2\n".as_bytes(), "types", "".as_bytes(), "a");
        assert!(err.is_err());
    }

    #[test]
    fn branching_assignment_rejected() {
        assert!(build("E\tAthlete\nE\tCity\n").is_err());
    }
}
