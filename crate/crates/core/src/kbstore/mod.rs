//! Ingestion and indexing of the knowledge-base and corpus inputs.
//!
//! Every input is a UTF-8, LF-terminated, tab-separated file. Stores are
//! built once and then only read.

mod context;
mod literals;
mod ontology;
mod popularity;
mod triples;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use context::{
    build_context_sets, parse_context_sets, Band, ContextStore, FrequencyBands, DEFAULT_DESC_LIMIT,
    DEFAULT_WINDOW,
};
pub use literals::{ingest_literals, parse_literals, LiteralFact, LiteralValue, Literals};
pub use ontology::{ingest_ontology, parse_ontology, TypeInfo, TypeOntology, ROOT};
pub use popularity::{build_popularity, parse_popularity, PopularityTable};
pub use triples::{ingest_triples, parse_triples, RelationStats, RoleCounts, Triple, TripleSet};

use crate::error::{Error, Result};
use crate::textio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
}

/// Optional input files for [`KnowledgeStore::ingest`]. Missing parts yield
/// empty sub-stores.
#[derive(Debug, Clone, Default)]
pub struct KbPaths {
    pub entities: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub literals: Option<PathBuf>,
    pub popularity: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeStore {
    pub entities: BTreeMap<String, Entity>,
    pub ontology: TypeOntology,
    pub triples: TripleSet,
    pub stats: RelationStats,
    pub literals: Literals,
    pub popularity: PopularityTable,
    pub context: ContextStore,
}

impl KnowledgeStore {
    pub fn ingest(paths: &KbPaths, window: usize, desc_limit: usize) -> Result<Self> {
        let names = match &paths.entities {
            Some(p) => parse_entity_names(textio::open(p)?, &p.display().to_string())?,
            None => BTreeMap::new(),
        };
        let (triples, stats) = match &paths.triples {
            Some(p) => ingest_triples(p)?,
            None => Default::default(),
        };
        let ontology = match (&paths.ontology, &paths.assignments) {
            (Some(o), Some(a)) => ingest_ontology(o, a)?,
            (None, None) => TypeOntology::default(),
            _ => {
                return Err(Error::Invalid(
                    "ontology and assignments must be given together".into(),
                ))
            }
        };
        let literals = match &paths.literals {
            Some(p) => ingest_literals(p)?,
            None => Literals::default(),
        };
        let popularity = match &paths.popularity {
            Some(p) => build_popularity(p)?,
            None => PopularityTable::default(),
        };
        let context = match (&paths.descriptions, &paths.mentions) {
            (Some(d), Some(m)) => build_context_sets(d, m, window, desc_limit)?,
            (None, None) => ContextStore::default(),
            _ => {
                return Err(Error::Invalid(
                    "descriptions and mentions must be given together".into(),
                ))
            }
        };
        Ok(Self::assemble(
            names, ontology, triples, stats, literals, popularity, context,
        ))
    }

    /// Builds the entity universe as the union of every id any part mentions.
    pub fn assemble(
        names: BTreeMap<String, String>,
        ontology: TypeOntology,
        triples: TripleSet,
        stats: RelationStats,
        literals: Literals,
        popularity: PopularityTable,
        context: ContextStore,
    ) -> Self {
        let mut ids: Vec<String> = names.keys().cloned().collect();
        ids.extend(ontology.typed_entities().map(str::to_owned));
        for t in triples.iter() {
            ids.push(t.head.clone());
            ids.push(t.tail.clone());
        }
        ids.extend(literals.facts.iter().map(|f| f.entity.clone()));
        ids.extend(popularity.entries().map(|(e, _)| e.to_owned()));
        ids.extend(context.described_entities().map(str::to_owned));

        let entities = ids
            .into_iter()
            .map(|id| {
                let name = names.get(&id).cloned().unwrap_or_else(|| id.clone());
                (id.clone(), Entity { id, name })
            })
            .collect();
        KnowledgeStore {
            entities,
            ontology,
            triples,
            stats,
            literals,
            popularity,
            context,
        }
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        textio::write_atomic(path, &bytes)
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let reader = textio::open(path)?;
        Ok(serde_json::from_reader(reader)?)
    }
}

/// Parses `id<TAB>name` rows.
pub fn parse_entity_names<R: BufRead>(
    reader: R,
    source_name: &str,
) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in textio::numbered_lines(reader, source_name) {
        let (n, line) = line?;
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, n, "expected id<TAB>name"))?;
        if id.is_empty() {
            return Err(Error::parse(source_name, n, "empty entity id"));
        }
        if out.insert(id.to_owned(), name.to_owned()).is_some() {
            return Err(Error::parse(
                source_name,
                n,
                format!("duplicate entity {id}"),
            ));
        }
    }
    Ok(out)
}
