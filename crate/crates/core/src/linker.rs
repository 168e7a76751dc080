//! A small entity-linking harness: alias candidates ranked by popularity, a
//! linear scorer trained with a ranking hinge loss, and P@1 evaluation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedstore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::kbstore::KnowledgeStore;
use crate::textio;

pub const N_FEATURES: usize = 5;
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "cosine",
    "prior",
    "exact_name",
    "token_overlap",
    "missing_embedding",
];

pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AliasIndex {
    surfaces: BTreeMap<String, BTreeSet<String>>,
    tokens: BTreeMap<String, BTreeSet<String>>,
}

impl AliasIndex {
    pub fn from_pairs<S: AsRef<str>, E: AsRef<str>>(
        pairs: impl IntoIterator<Item = (S, E)>,
    ) -> Self {
        let mut idx = AliasIndex::default();
        for (surface, entity) in pairs {
            let entity = entity.as_ref().to_owned();
            for tok in tokenize(surface.as_ref()) {
                idx.tokens.entry(tok).or_default().insert(entity.clone());
            }
            idx.surfaces
                .entry(fold(surface.as_ref()))
                .or_default()
                .insert(entity);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Entities whose alias equals the surface or contains one of its tokens.
    pub fn lookup(&self, surface: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        if let Some(es) = self.surfaces.get(&fold(surface)) {
            out.extend(es.iter().map(String::as_str));
        }
        for tok in tokenize(surface) {
            if let Some(es) = self.tokens.get(&tok) {
                out.extend(es.iter().map(String::as_str));
            }
        }
        out
    }
}

pub fn parse_aliases<R: BufRead>(reader: R, source_name: &str) -> Result<AliasIndex> {
    let mut pairs = Vec::new();
    for item in textio::numbered_lines(reader, source_name) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                source_name,
                n,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (surface, entity) = (fields[0].trim(), fields[1].trim());
        if surface.is_empty() || entity.is_empty() {
            return Err(Error::parse(source_name, n, "empty surface or entity"));
        }
        pairs.push((surface.to_owned(), entity.to_owned()));
    }
    Ok(AliasIndex::from_pairs(pairs))
}

pub fn load_aliases(path: &Path) -> Result<AliasIndex> {
    parse_aliases(textio::open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub doc: String,
    pub surface: String,
    #[serde(default)]
    pub context: Vec<String>,
    pub gold: String,
}

pub fn parse_mentions<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Mention>> {
    let mut out = Vec::new();
    for item in textio::numbered_lines(reader, source_name) {
        let (n, line) = item?;
        let m: Mention =
            serde_json::from_str(&line).map_err(|e| Error::parse(source_name, n, e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

pub fn load_mentions(path: &Path) -> Result<Vec<Mention>> {
    parse_mentions(textio::open(path)?, &path.display().to_string())
}

/// The `k` highest-popularity entities matching `surface`, ties broken by id.
pub fn generate_candidates(
    surface: &str,
    index: &AliasIndex,
    kb: &KnowledgeStore,
    k: usize,
) -> Vec<String> {
    let mut cands: Vec<(u64, &str)> = index
        .lookup(surface)
        .into_iter()
        .map(|e| (kb.popularity.count(e), e))
        .collect();
    cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    cands
        .into_iter()
        .take(k)
        .map(|(_, e)| e.to_owned())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkerConfig {
    pub candidates: usize,
    /// Context tokens kept around the mention.
    pub window: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            candidates: 30,
            window: 20,
            margin: 1.0,
            learning_rate: 0.1,
            max_epochs: 200,
            patience: 3,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkScorer {
    pub weights: Vec<f64>,
    pub margin: f64,
}

impl LinkScorer {
    pub fn zeros(margin: f64) -> Self {
        LinkScorer {
            weights: vec![0.0; N_FEATURES],
            margin,
        }
    }

    /// Ranks purely by popularity prior.
    pub fn popularity_only(margin: f64) -> Self {
        let mut s = Self::zeros(margin);
        s.weights[1] = 1.0;
        s
    }

    pub fn score(&self, features: &[f64]) -> f64 {
        self.weights.iter().zip(features).map(|(w, f)| w * f).sum()
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Candidates of one mention with their feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub candidates: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub gold: Option<usize>,
}

pub struct Linker<'a> {
    pub index: &'a AliasIndex,
    pub kb: &'a KnowledgeStore,
    pub entities: &'a EmbeddingStore,
    /// Word vectors for context tokens; must share the entity dimension.
    pub words: &'a EmbeddingStore,
    pub cfg: LinkerConfig,
}

impl<'a> Linker<'a> {
    pub fn new(
        index: &'a AliasIndex,
        kb: &'a KnowledgeStore,
        entities: &'a EmbeddingStore,
        words: &'a EmbeddingStore,
        cfg: LinkerConfig,
    ) -> Result<Self> {
        if entities.dim() != words.dim() {
            return Err(Error::DimensionMismatch {
                expected: entities.dim(),
                actual: words.dim(),
            });
        }
        if cfg.candidates == 0 {
            return Err(Error::Invalid("candidate count must be >= 1".into()));
        }
        Ok(Linker {
            index,
            kb,
            entities,
            words,
            cfg,
        })
    }

    pub fn candidates(&self, m: &Mention) -> Vec<String> {
        generate_candidates(&m.surface, self.index, self.kb, self.cfg.candidates)
    }

    /// Mean vector of the central `window` context tokens that have vectors.
    pub fn context_vector(&self, context: &[String]) -> Option<Vec<f64>> {
        let w = self.cfg.window.min(context.len());
        let start = (context.len() - w) / 2;
        let mut sum = vec![0.0; self.words.dim()];
        let mut n = 0;
        for tok in &context[start..start + w] {
            let v = self
                .words
                .get(tok)
                .or_else(|| self.words.get(&tok.to_lowercase()));
            if let Some(v) = v {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
    }

    pub fn features(&self, m: &Mention, ctx: Option<&[f64]>, candidate: &str) -> Vec<f64> {
        let vec = self.entities.get(candidate);
        let cos = match (vec, ctx) {
            (Some(v), Some(c)) => cosine(v, c),
            _ => 0.0,
        };
        let total = self.kb.popularity.total();
        let prior = if total == 0 {
            0.0
        } else {
            self.kb.popularity.count(candidate) as f64 / total as f64
        };
        let name = self
            .kb
            .entities
            .get(candidate)
            .map_or(candidate, |e| e.name.as_str());
        let exact = f64::from(u8::from(fold(name) == fold(&m.surface)));
        let stoks = tokenize(&m.surface);
        let ntoks: HashSet<String> = tokenize(name).into_iter().collect();
        let overlap = if stoks.is_empty() {
            0.0
        } else {
            stoks.iter().filter(|t| ntoks.contains(*t)).count() as f64 / stoks.len() as f64
        };
        let missing = f64::from(u8::from(vec.is_none()));
        vec![cos, prior, exact, overlap, missing]
    }

    pub fn prepare(&self, m: &Mention) -> Prepared {
        let candidates = self.candidates(m);
        let ctx = self.context_vector(&m.context);
        let features = candidates
            .iter()
            .map(|c| self.features(m, ctx.as_deref(), c))
            .collect();
        let gold = candidates.iter().position(|c| *c == m.gold);
        Prepared {
            candidates,
            features,
            gold,
        }
    }

    pub fn train_hinge(&self, mentions: &[Mention]) -> Result<(LinkScorer, TrainSummary)> {
        let mut summary = TrainSummary::default();
        let mut data = Vec::new();
        for m in mentions {
            let p = self.prepare(m);
            match p.gold {
                Some(g) => data.push((p.features, g)),
                None => summary.skipped_gold_missing += 1,
            }
        }
        if data.is_empty() {
            return Err(Error::Training(
                "no training mention has its gold entity among the candidates".into(),
            ));
        }
        let mut rng = crate::rng::stream(self.cfg.seed, "linker/validation");
        data.shuffle(&mut rng);
        let n_val = ((data.len() as f64) * self.cfg.validation_fraction).floor() as usize;
        let (val, train) = if n_val == 0 || n_val == data.len() {
            (&data[..], &data[..])
        } else {
            data.split_at(n_val)
        };
        summary.trainable = train.len();
        summary.validation = val.len();

        let mut scorer = LinkScorer::zeros(self.cfg.margin);
        let mut best = scorer.clone();
        let mut best_val = hinge_objective(&scorer.weights, val, self.cfg.margin).0;
        let mut stale = 0;
        for _ in 0..self.cfg.max_epochs {
            let (loss, grad) = hinge_objective(&scorer.weights, train, self.cfg.margin);
            summary.losses.push(loss);
            if loss == 0.0 {
                break;
            }
            scorer
                .weights
                .iter_mut()
                .zip(&grad)
                .for_each(|(w, g)| *w -= self.cfg.learning_rate * g);
            summary.epochs += 1;
            let v = hinge_objective(&scorer.weights, val, self.cfg.margin).0;
            if v < best_val {
                best_val = v;
                best = scorer.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.cfg.patience {
                    break;
                }
            }
        }
        summary.best_validation_loss = best_val;
        Ok((best, summary))
    }

    pub fn evaluate(&self, mentions: &[Mention], scorer: &LinkScorer) -> Result<ElResult> {
        let mut skipped = 0;
        let mut predictions = Vec::new();
        for m in mentions {
            if !self.kb.contains(&m.gold) {
                skipped += 1;
                continue;
            }
            let p = self.prepare(m);
            let best = (0..p.candidates.len()).fold(None, |b: Option<usize>, i| match b {
                Some(j) if scorer.score(&p.features[j]) >= scorer.score(&p.features[i]) => Some(j),
                _ => Some(i),
            });
            let predicted = best.map(|i| p.candidates[i].clone());
            predictions.push(ElPrediction {
                id: m.id.clone(),
                doc: m.doc.clone(),
                gold: m.gold.clone(),
                correct: predicted.as_deref() == Some(m.gold.as_str()),
                predicted,
                n_candidates: p.candidates.len(),
            });
        }
        let (micro, macro_) = precision_at_1(&predictions)?;
        Ok(ElResult {
            micro_p_at_1: micro,
            macro_p_at_1: macro_,
            n_mentions: predictions.len(),
            skipped_gold_not_in_kb: skipped,
            predictions,
        })
    }
}

/// Mean ranking hinge loss `max(0, γ − s_gold + max_{c≠gold} s_c)` and a
/// subgradient. Each item is (candidate feature rows, gold position).
pub fn hinge_objective(w: &[f64], data: &[(Vec<Vec<f64>>, usize)], margin: f64) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    if data.is_empty() {
        return (0.0, grad);
    }
    let dot = |f: &[f64]| w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
    for (feats, gold) in data {
        let sg = dot(&feats[*gold]);
        let rival = (0..feats.len())
            .filter(|&i| i != *gold)
            .map(|i| (dot(&feats[i]), i))
            .fold(None, |b: Option<(f64, usize)>, x| match b {
                Some(b) if b.0 >= x.0 => Some(b),
                _ => Some(x),
            });
        if let Some((sr, r)) = rival {
            let l = margin - sg + sr;
            if l > 0.0 {
                loss += l;
                for j in 0..w.len() {
                    grad[j] += feats[r][j] - feats[*gold][j];
                }
            }
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub trainable: usize,
    pub validation: usize,
    pub skipped_gold_missing: usize,
    pub epochs: usize,
    pub best_validation_loss: f64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElPrediction {
    pub id: String,
    pub doc: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub correct: bool,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElResult {
    pub micro_p_at_1: f64,
    pub macro_p_at_1: f64,
    pub n_mentions: usize,
    pub skipped_gold_not_in_kb: usize,
    pub predictions: Vec<ElPrediction>,
}

/// Micro P@1 over mentions and macro P@1 over documents, both × 100.
pub fn precision_at_1(predictions: &[ElPrediction]) -> Result<(f64, f64)> {
    if predictions.is_empty() {
        return Err(Error::Invalid("no mentions to evaluate".into()));
    }
    let mut docs: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in predictions {
        let d = docs.entry(&p.doc).or_default();
        d.0 += usize::from(p.correct);
        d.1 += 1;
    }
    let correct = predictions.iter().filter(|p| p.correct).count();
    let micro = 100.0 * correct as f64 / predictions.len() as f64;
    let macro_ = 100.0
        * docs
            .values()
            .map(|(c, n)| *c as f64 / *n as f64)
            .sum::<f64>()
        / docs.len() as f64;
    Ok((micro, macro_))
}
