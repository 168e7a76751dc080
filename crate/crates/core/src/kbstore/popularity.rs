use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

/// Inlink counts `M_e` with their total `M_*`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopularityTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl PopularityTable {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        PopularityTable { counts, total }
    }

    /// Link count of `entity`; entities absent from the table have 0.
    pub fn count(&self, entity: &str) -> u64 {
        self.counts.get(entity).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `M_e / M_*`. Errors when the table carries no links at all.
    pub fn prior(&self, entity: &str) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::Invalid(
                "popularity prior undefined: total link count is 0".into(),
            ));
        }
        Ok(self.count(entity) as f64 / self.total as f64)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn parse_popularity<R: BufRead>(reader: R, source_name: &str) -> Result<PopularityTable> {
    let mut counts = BTreeMap::new();
    for line in textio::numbered_lines(reader, source_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [entity, raw] = fields[..] else {
            return Err(Error::parse(source_name, n, "expected entity, count"));
        };
        let raw = raw.trim();
        let count: u64 = match raw.parse::<i64>() {
            Ok(c) if c < 0 => {
                return Err(Error::parse(source_name, n, format!("negative count {c}")))
            }
            Ok(c) => c as u64,
            Err(_) => return Err(Error::parse(source_name, n, format!("bad count {raw:?}"))),
        };
        if counts.insert(entity.to_owned(), count).is_some() {
            return Err(Error::parse(
                source_name,
                n,
                format!("duplicate entity {entity}"),
            ));
        }
    }
    Ok(PopularityTable::from_counts(counts))
}

pub fn build_popularity(path: &Path) -> Result<PopularityTable> {
    parse_popularity(textio::open(path)?, &path.display().to_string())
}
