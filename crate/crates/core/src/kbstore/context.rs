use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_DESC_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    High,
    Mid,
}

impl Band {
    pub fn family(self) -> &'static str {
        match self {
            Band::High => "W-H",
            Band::Mid => "W-M",
        }
    }
}

/// Document-frequency thresholds. High words occur in more than `high_min`
/// descriptions; mid words in more than `mid_min` and at most `high_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBands {
    pub high_min: usize,
    pub mid_min: usize,
}

impl Default for FrequencyBands {
    fn default() -> Self {
        FrequencyBands {
            high_min: 100_000,
            mid_min: 10_000,
        }
    }
}

impl FrequencyBands {
    pub fn band_of(&self, doc_freq: usize) -> Option<Band> {
        if doc_freq > self.high_min {
            Some(Band::High)
        } else if doc_freq > self.mid_min {
            Some(Band::Mid)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextStore {
    contexts: BTreeMap<String, BTreeSet<String>>,
    doc_freq: BTreeMap<String, usize>,
    /// Entities that have a description row.
    described: BTreeSet<String>,
    /// Mention rows whose entity had no description.
    pub ignored_mentions: usize,
}

impl ContextStore {
    pub fn context(&self, entity: &str) -> Option<&BTreeSet<String>> {
        self.contexts.get(entity)
    }

    pub fn has_context_word(&self, entity: &str, word: &str) -> bool {
        self.contexts.get(entity).is_some_and(|c| c.contains(word))
    }

    pub fn doc_freq(&self, word: &str) -> usize {
        self.doc_freq.get(word).copied().unwrap_or(0)
    }

    pub fn described_entities(&self) -> impl Iterator<Item = &str> {
        self.described.iter().map(String::as_str)
    }

    /// Words of `band` in lexicographic order.
    pub fn band_words(&self, bands: &FrequencyBands, band: Band) -> Vec<&str> {
        self.doc_freq
            .iter()
            .filter(|(_, &df)| bands.band_of(df) == Some(band))
            .map(|(w, _)| w.as_str())
            .collect()
    }

    /// Entities whose context contains `word`, in id order.
    pub fn entities_with_word(&self, word: &str) -> Vec<&str> {
        self.contexts
            .iter()
            .filter(|(_, ctx)| ctx.contains(word))
            .map(|(e, _)| e.as_str())
            .collect()
    }
}

/// Intersects each entity's description prefix with the words seen near its
/// mentions.
pub fn parse_context_sets<R1: BufRead, R2: BufRead>(
    descriptions: R1,
    descriptions_name: &str,
    mentions: R2,
    mentions_name: &str,
    window: usize,
    desc_limit: usize,
) -> Result<ContextStore> {
    let mut prefixes: BTreeMap<String, HashSet<String>> = BTreeMap::new();
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for line in textio::numbered_lines(descriptions, descriptions_name) {
        let (n, line) = line?;
        let (entity, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(descriptions_name, n, "expected entity<TAB>tokens"))?;
        if prefixes.contains_key(entity) {
            return Err(Error::parse(
                descriptions_name,
                n,
                format!("duplicate description for {entity}"),
            ));
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let distinct: HashSet<&str> = tokens.iter().copied().collect();
        for w in distinct {
            *doc_freq.entry(w.to_owned()).or_insert(0) += 1;
        }
        let prefix = tokens
            .iter()
            .take(desc_limit)
            .map(|w| (*w).to_owned())
            .collect();
        prefixes.insert(entity.to_owned(), prefix);
    }

    let mut windows: BTreeMap<String, HashSet<String>> = BTreeMap::new();
    let mut ignored = 0;
    for line in textio::numbered_lines(mentions, mentions_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [entity, left, right] = fields[..] else {
            return Err(Error::parse(
                mentions_name,
                n,
                "expected entity, left tokens, right tokens",
            ));
        };
        if !prefixes.contains_key(entity) {
            ignored += 1;
            continue;
        }
        let left: Vec<&str> = left.split_whitespace().collect();
        let near = left
            .iter()
            .rev()
            .take(window)
            .copied()
            .chain(right.split_whitespace().take(window))
            .map(str::to_owned);
        windows.entry(entity.to_owned()).or_default().extend(near);
    }

    let mut contexts = BTreeMap::new();
    for (entity, near) in &windows {
        let prefix = &prefixes[entity];
        let ctx: BTreeSet<String> = near.intersection(prefix).cloned().collect();
        contexts.insert(entity.clone(), ctx);
    }
    Ok(ContextStore {
        contexts,
        doc_freq,
        described: prefixes.into_keys().collect(),
        ignored_mentions: ignored,
    })
}

pub fn build_context_sets(
    descriptions: &Path,
    mentions: &Path,
    window: usize,
    desc_limit: usize,
) -> Result<ContextStore> {
    parse_context_sets(
        textio::open(descriptions)?,
        &descriptions.display().to_string(),
        textio::open(mentions)?,
        &mentions.display().to_string(),
        window,
        desc_limit,
    )
}
