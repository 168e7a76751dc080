//! Probing-task generation.
//!
//! Every generator is a pure function of the knowledge store, the
//! configuration and a random stream derived from `(seed, task id)`, so tasks
//! can be produced in any order or in parallel with identical results.

mod corrupt;
mod factual;
mod pairs;
mod popularity;
mod relations;
mod types;
mod words;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use corrupt::{Corrupter, CorruptionConfig, CorruptionOutcome, PoolKind, Side};
pub use factual::FactKind;
pub use pairs::{FIRST_LARGER, SECOND_LARGER};
pub use popularity::{popularity_bin, PopKind, POPULARITY_BINS};
pub use relations::{RelationMode, CORRUPTED, NONE_LABEL, TRUE_RELATION};
pub use words::{ABSENT, PRESENT};

use crate::error::{Error, Result};
use crate::kbstore::{Band, FrequencyBands, KnowledgeStore};
use crate::rng::{self, TaskRng};
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Binary,
    Multiclass,
    Regression,
    PairwiseBinary,
    PairwiseMulticlass,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        self != TaskKind::Regression
    }

    pub fn arity(self) -> usize {
        match self {
            TaskKind::PairwiseBinary | TaskKind::PairwiseMulticlass => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
            TaskKind::Regression => "regression",
            TaskKind::PairwiseBinary => "pairwise-binary",
            TaskKind::PairwiseMulticlass => "pairwise-multiclass",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(String),
    Value(f64),
}

impl Label {
    pub fn class(&self) -> Option<&str> {
        match self {
            Label::Class(c) => Some(c),
            Label::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Label::Value(v) => Some(*v),
            Label::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub inputs: Vec<String>,
    pub label: Label,
}

impl Instance {
    pub fn single(entity: &str, label: Label) -> Self {
        Instance {
            inputs: vec![entity.to_owned()],
            label,
        }
    }

    pub fn pair(a: &str, b: &str, label: Label) -> Self {
        Instance {
            inputs: vec![a.to_owned(), b.to_owned()],
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Corruption bookkeeping for relation tasks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStats {
    pub finest_type: usize,
    pub coarser_type: usize,
    pub role_fallback: usize,
    pub collisions: usize,
    pub failures: usize,
}

impl CorruptionStats {
    pub(crate) fn record(&mut self, pool: PoolKind) {
        match pool {
            PoolKind::FinestType => self.finest_type += 1,
            PoolKind::CoarserType { .. } => self.coarser_type += 1,
            PoolKind::Role => self.role_fallback += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenStats {
    /// Candidates (entities, triples or pairs) removed because an entity had
    /// no embedding.
    pub dropped_missing_embedding: usize,
    /// Labels, relations or words left out, with the reason.
    pub skipped: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corruption: Option<CorruptionStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task_id: String,
    pub kind: TaskKind,
    /// Ordered label set; empty for regression.
    pub labels: Vec<String>,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    pub stats: GenStats,
}

impl TaskDataset {
    pub fn family(&self) -> &str {
        family_of(&self.task_id)
    }

    pub fn split(&self, split: Split) -> &[Instance] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// `(train, test)` instance counts per label, in label order.
    pub fn label_counts(&self) -> BTreeMap<String, (usize, usize)> {
        let mut out: BTreeMap<String, (usize, usize)> =
            self.labels.iter().map(|l| (l.clone(), (0, 0))).collect();
        for (split, insts) in [(Split::Train, &self.train), (Split::Test, &self.test)] {
            for inst in insts {
                if let Some(c) = inst.label.class() {
                    let e = out.entry(c.to_owned()).or_default();
                    match split {
                        Split::Train => e.0 += 1,
                        Split::Test => e.1 += 1,
                    }
                }
            }
        }
        out
    }

    /// One JSON object per instance, train split first.
    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            task: &'a str,
            kind: TaskKind,
            split: Split,
            inputs: &'a [String],
            label: &'a Label,
        }
        let mut out = String::new();
        for (split, insts) in [(Split::Train, &self.train), (Split::Test, &self.test)] {
            for inst in insts {
                out.push_str(&serde_json::to_string(&Line {
                    task: &self.task_id,
                    kind: self.kind,
                    split,
                    inputs: &inst.inputs,
                    label: &inst.label,
                })?);
                out.push('\n');
            }
        }
        Ok(out)
    }

    /// Reads a task file; labels and stats come from the manifest entry.
    pub fn from_jsonl<R: BufRead>(
        reader: R,
        source_name: &str,
        entry: &ManifestEntry,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            task: String,
            kind: TaskKind,
            split: Split,
            inputs: Vec<String>,
            label: Label,
        }
        let mut ds = TaskDataset {
            task_id: entry.task.clone(),
            kind: entry.kind,
            labels: entry.labels.clone(),
            train: Vec::new(),
            test: Vec::new(),
            stats: entry.stats.clone(),
        };
        for line in textio::numbered_lines(reader, source_name) {
            let (n, line) = line?;
            let l: Line = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, n, e.to_string()))?;
            if l.task != ds.task_id || l.kind != ds.kind {
                return Err(Error::parse(
                    source_name,
                    n,
                    "instance belongs to another task",
                ));
            }
            if l.inputs.len() != ds.kind.arity() {
                return Err(Error::parse(
                    source_name,
                    n,
                    format!("{} inputs for a {} task", l.inputs.len(), ds.kind),
                ));
            }
            let inst = Instance {
                inputs: l.inputs,
                label: l.label,
            };
            match l.split {
                Split::Train => ds.train.push(inst),
                Split::Test => ds.test.push(inst),
            }
        }
        Ok(ds)
    }
}

/// Family prefix of a task id: `"R-I:country"` -> `"R-I"`.
pub fn family_of(task_id: &str) -> &str {
    task_id.split_once(':').map_or(task_id, |(f, _)| f)
}

/// The 22 task families, in report order.
pub const FAMILIES: [&str; 22] = [
    "W-H", "W-M", "T-1", "T-2", "T-3", "R-D", "R-I", "R-C", "R-C+I", "P-R", "P-B", "P-Any", "P-2",
    "P-5", "P-10", "F-A", "F-A+T", "F-P", "F-P+T", "F-R", "F-C", "F-D",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub seed: u64,
    pub per_label: usize,
    pub n_words: usize,
    pub bands: FrequencyBands,
    pub corruption: CorruptionConfig,
    /// Positives (and corruptions) per relation per split in R-D.
    pub detection_per_relation: usize,
    /// None-labelled corruptions per relation per split in R-C+I.
    pub none_per_relation: usize,
    pub century_labels: usize,
    pub decade_labels: usize,
    /// Types whose members count as locations for F-A/F-P; empty = any.
    pub location_types: Vec<String>,
    /// Types whose members count as organisations for F-R; empty = any.
    pub organisation_types: Vec<String>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            seed: 0,
            per_label: 500,
            n_words: 1000,
            bands: FrequencyBands::default(),
            corruption: CorruptionConfig::default(),
            detection_per_relation: 5,
            none_per_relation: 100,
            century_labels: 5,
            decade_labels: 20,
            location_types: Vec::new(),
            organisation_types: Vec::new(),
        }
    }
}

/// One unit of generation work producing exactly one dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskJob {
    Word {
        band: Band,
        word: String,
    },
    Type {
        level: u8,
    },
    Relation {
        mode: RelationMode,
        relation: Option<String>,
    },
    Popularity(PopKind),
    Factual {
        kind: FactKind,
        type_restricted: bool,
    },
}

impl TaskJob {
    pub fn task_id(&self) -> String {
        match self {
            TaskJob::Word { band, word } => format!("{}:{word}", band.family()),
            TaskJob::Type { level } => format!("T-{level}"),
            TaskJob::Relation { mode, relation } => match relation {
                Some(r) => format!("{}:{r}", mode.family()),
                None => mode.family().to_owned(),
            },
            TaskJob::Popularity(k) => k.task_id().to_owned(),
            TaskJob::Factual {
                kind,
                type_restricted,
            } => kind.task_id(*type_restricted),
        }
    }
}

/// Output of [`TaskGenerator::plan`]: jobs plus family-level skips.
#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub jobs: Vec<TaskJob>,
    /// Family id -> reasons items were left out before any job ran.
    pub skipped: BTreeMap<String, Vec<String>>,
}

pub struct TaskGenerator<'a> {
    pub(crate) kb: &'a KnowledgeStore,
    pub(crate) cfg: &'a TaskConfig,
    available: Option<&'a HashSet<String>>,
    corrupter: Corrupter<'a>,
}

impl<'a> TaskGenerator<'a> {
    /// `available`, when given, restricts every task to entities that have
    /// an embedding.
    pub fn new(
        kb: &'a KnowledgeStore,
        cfg: &'a TaskConfig,
        available: Option<&'a HashSet<String>>,
    ) -> Self {
        let corrupter = Corrupter::new(kb, available);
        TaskGenerator {
            kb,
            cfg,
            available,
            corrupter,
        }
    }

    pub(crate) fn is_available(&self, id: &str) -> bool {
        self.available.is_none_or(|a| a.contains(id))
    }

    pub(crate) fn rng(&self, stream: &str) -> TaskRng {
        rng::stream(self.cfg.seed, stream)
    }

    pub fn corrupter(&self) -> &Corrupter<'a> {
        &self.corrupter
    }

    /// Expands the selected families into jobs. `selection` holds family ids
    /// or exact task ids; `None` selects everything.
    pub fn plan(&self, selection: Option<&[String]>) -> Plan {
        let wanted =
            |family: &str| selection.is_none_or(|s| s.iter().any(|x| family_of(x) == family));
        let exact = |id: &str| {
            selection.is_none_or(|s| s.iter().any(|x| x == id || (x.as_str() == family_of(id))))
        };
        let mut plan = Plan::default();
        for band in [Band::High, Band::Mid] {
            if wanted(band.family()) {
                let (words, skipped) = self.select_words(band);
                plan.skipped.insert(band.family().to_owned(), skipped);
                plan.jobs.extend(
                    words
                        .into_iter()
                        .map(|word| TaskJob::Word { band, word })
                        .filter(|j| exact(&j.task_id())),
                );
            }
        }
        for level in 1..=3 {
            let job = TaskJob::Type { level };
            if exact(&job.task_id()) {
                plan.jobs.push(job);
            }
        }
        if wanted("R-D") {
            plan.jobs.push(TaskJob::Relation {
                mode: RelationMode::Detection,
                relation: None,
            });
        }
        if wanted("R-I") {
            let (rels, skipped) = self.qualifying_relations(self.cfg.per_label);
            plan.skipped.insert("R-I".into(), skipped);
            plan.jobs.extend(
                rels.into_iter()
                    .map(|r| TaskJob::Relation {
                        mode: RelationMode::Identification,
                        relation: Some(r),
                    })
                    .filter(|j| exact(&j.task_id())),
            );
        }
        for mode in [
            RelationMode::Classification,
            RelationMode::ClassificationNone,
        ] {
            if wanted(mode.family()) {
                plan.jobs.push(TaskJob::Relation {
                    mode,
                    relation: None,
                });
            }
        }
        for kind in PopKind::ALL {
            let job = TaskJob::Popularity(kind);
            if exact(&job.task_id()) {
                plan.jobs.push(job);
            }
        }
        for (kind, type_restricted) in [
            (FactKind::Area, false),
            (FactKind::Area, true),
            (FactKind::Population, false),
            (FactKind::Population, true),
            (FactKind::Revenue, false),
            (FactKind::Century, false),
            (FactKind::Decade, false),
        ] {
            let job = TaskJob::Factual {
                kind,
                type_restricted,
            };
            if exact(&job.task_id()) {
                plan.jobs.push(job);
            }
        }
        plan
    }

    pub fn run(&self, job: &TaskJob) -> Result<TaskDataset> {
        match job {
            TaskJob::Word { band, word } => self.gen_word_task(*band, word),
            TaskJob::Type { level } => self.gen_type_task(*level),
            TaskJob::Relation { mode, relation } => {
                self.gen_relation_task(*mode, relation.as_deref())
            }
            TaskJob::Popularity(kind) => self.gen_popularity_task(*kind),
            TaskJob::Factual {
                kind,
                type_restricted,
            } => self.gen_factual_task(*kind, *type_restricted),
        }
    }
}

pub(crate) fn generation_error(task: &str, reason: impl Into<String>) -> Error {
    Error::Generation {
        task: task.to_owned(),
        reason: reason.into(),
    }
}

/// Shuffles `items` and splits the first `2 * n` into `(train, test)`.
pub(crate) fn split_sample<T: Clone>(
    items: &[T],
    n: usize,
    rng: &mut impl Rng,
) -> Option<(Vec<T>, Vec<T>)> {
    if items.len() < 2 * n {
        return None;
    }
    let mut v = items.to_vec();
    v.shuffle(rng);
    let test = v[n..2 * n].to_vec();
    v.truncate(n);
    Some((v, test))
}

// ---- manifest -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task: String,
    pub family: String,
    pub kind: TaskKind,
    pub labels: Vec<String>,
    pub file: String,
    pub train: usize,
    pub test: usize,
    /// Label -> `[train, test]` counts.
    pub label_counts: BTreeMap<String, [usize; 2]>,
    pub stats: GenStats,
}

impl ManifestEntry {
    pub fn for_dataset(ds: &TaskDataset, file: String) -> Self {
        ManifestEntry {
            task: ds.task_id.clone(),
            family: ds.family().to_owned(),
            kind: ds.kind,
            labels: ds.labels.clone(),
            file,
            train: ds.train.len(),
            test: ds.test.len(),
            label_counts: ds
                .label_counts()
                .into_iter()
                .map(|(k, (a, b))| (k, [a, b]))
                .collect(),
            stats: ds.stats.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub task: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: TaskConfig,
    pub tasks: Vec<ManifestEntry>,
    pub failures: Vec<GenerationFailure>,
    pub skipped: BTreeMap<String, Vec<String>>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(textio::open(path)?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// File-system-safe, collision-free name for a task id.
pub fn task_file_name(task_id: &str) -> String {
    let mut out = String::with_capacity(task_id.len() + 6);
    for b in task_id.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' => out.push(b as char),
            _ => out.push_str(&format!("_{b:02x}")),
        }
    }
    out.push_str(".jsonl");
    out
}

pub fn load_task(dir: &Path, entry: &ManifestEntry) -> Result<TaskDataset> {
    let path = dir.join(&entry.file);
    TaskDataset::from_jsonl(textio::open(&path)?, &path.display().to_string(), entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_escape_separators() {
        assert_eq!(task_file_name("R-C+I"), "R-C_2bI.jsonl");
        assert_eq!(task_file_name("W-H:genus"), "W-H_3agenus.jsonl");
        assert_ne!(task_file_name("a_b"), task_file_name("a:b"));
    }

    #[test]
    fn family_prefix() {
        assert_eq!(family_of("R-I:country"), "R-I");
        assert_eq!(family_of("P-5"), "P-5");
    }

    #[test]
    fn jsonl_round_trip() {
        let ds = TaskDataset {
            task_id: "P-R".into(),
            kind: TaskKind::Regression,
            labels: vec![],
            train: vec![Instance::single("E1", Label::Value(3.912))],
            test: vec![Instance::single("E2", Label::Value(0.0))],
            stats: GenStats::default(),
        };
        let text = ds.to_jsonl().unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"task":"P-R","kind":"regression","split":"train","inputs":["E1"],"label":3.912}"#
        );
        let entry = ManifestEntry::for_dataset(&ds, "x".into());
        let back = TaskDataset::from_jsonl(text.as_bytes(), "x", &entry).unwrap();
        assert_eq!(back, ds);
    }
}
