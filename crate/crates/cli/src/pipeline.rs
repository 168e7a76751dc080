use std::collections::HashSet;
use std::path::{Path, PathBuf};

use entprobe::embedstore::{load_embeddings, synthesize, write_embeddings, EmbeddingStore};
use entprobe::kbstore::KnowledgeStore;
use entprobe::linker::{
    load_aliases, load_mentions, ElResult, LinkScorer, Linker, LinkerConfig, TrainSummary,
};
use entprobe::metrics::MetricSet;
use entprobe::probe::{self, ProbeConfig};
use entprobe::taskgen::{
    family_of, load_task, task_file_name, GenerationFailure, Instance, Manifest, ManifestEntry,
    Split, TaskDataset, TaskGenerator, TaskKind,
};
use entprobe::{write_atomic, Error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report;

pub const SNAPSHOT: &str = "kb/snapshot.json";
pub const SYNTH_EMBEDDINGS: &str = "synth/embeddings.txt";
pub const SYNTH_LAYOUT: &str = "synth/layout.json";
pub const TASKS_DIR: &str = "tasks";
pub const MANIFEST: &str = "tasks/manifest.json";
pub const MODELS_DIR: &str = "probe/models";
pub const CONFUSION_DIR: &str = "probe/confusion";
pub const PROBE_RESULTS: &str = "probe/results.json";
pub const EL_RESULTS: &str = "el/results.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub family: String,
    pub kind: TaskKind,
    pub n_labels: usize,
    pub train: usize,
    pub test: usize,
    /// Instances removed at probe time for lack of an embedding, plus those
    /// already dropped during generation.
    pub dropped: usize,
    pub metrics: MetricSet,
    pub baseline_rmse: Option<f64>,
    pub epochs: usize,
    pub converged: bool,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub task: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResults {
    pub seed: u64,
    pub probe: ProbeConfig,
    pub rows: Vec<TaskResult>,
    pub failures: Vec<ProbeFailure>,
    pub generation_failures: Vec<GenerationFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElReport {
    pub config: LinkerConfig,
    pub training: TrainSummary,
    pub scorer: LinkScorer,
    pub popularity_baseline: [f64; 2],
    pub test: ElResult,
}

fn to_json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|_| CliError::missing(what, path))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(what, path))
    }
}

/// Drops instances with an entity the store lacks.
fn retain_embedded(ds: &mut TaskDataset, store: &EmbeddingStore) -> usize {
    let has = |i: &Instance| i.inputs.iter().all(|e| store.contains(e));
    let before = ds.train.len() + ds.test.len();
    ds.train.retain(has);
    ds.test.retain(has);
    before - ds.train.len() - ds.test.len()
}

pub struct Pipeline {
    pub cfg: RunConfig,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> CliResult<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.jobs)
            .build()
            .map_err(|e| CliError::Other(format!("cannot start worker pool: {e}")))
    }

    fn selected(&self, task_id: &str) -> bool {
        self.cfg
            .tasks
            .as_ref()
            .is_none_or(|s| s.iter().any(|x| x == task_id || x == family_of(task_id)))
    }

    pub fn ingest(&self) -> CliResult<PathBuf> {
        let paths = self.cfg.kb_paths();
        for (what, p) in [
            ("entities file", &paths.entities),
            ("triples file", &paths.triples),
            ("ontology file", &paths.ontology),
            ("assignments file", &paths.assignments),
            ("literals file", &paths.literals),
            ("popularity file", &paths.popularity),
            ("descriptions file", &paths.descriptions),
            ("mentions file", &paths.mentions),
        ] {
            if let Some(p) = p {
                require(p, what)?;
            }
        }
        let kb = KnowledgeStore::ingest(&paths, self.cfg.window, self.cfg.desc_limit)?;
        let out = self.path(SNAPSHOT);
        kb.save_snapshot(&out)?;
        Ok(out)
    }

    pub fn load_kb(&self) -> CliResult<KnowledgeStore> {
        let p = self.path(SNAPSHOT);
        require(&p, "knowledge-store snapshot (run ingest first)")?;
        Ok(KnowledgeStore::load_snapshot(&p)?)
    }

    pub fn synth(&self) -> CliResult<PathBuf> {
        let kb = self.load_kb()?;
        let (store, layout) = synthesize(&self.cfg.synth, &kb)?;
        let out = self.path(SYNTH_EMBEDDINGS);
        write_embeddings(&store, &out)?;
        write_atomic(&self.path(SYNTH_LAYOUT), &to_json(&layout)?)?;
        Ok(out)
    }

    fn embeddings_path(&self) -> CliResult<PathBuf> {
        match &self.cfg.inputs.embeddings {
            Some(p) => {
                require(p, "embeddings file")?;
                Ok(p.clone())
            }
            None => {
                let p = self.path(SYNTH_EMBEDDINGS);
                require(&p, "embeddings (set `embeddings` or run synth)")?;
                Ok(p)
            }
        }
    }

    pub fn embeddings(&self) -> CliResult<EmbeddingStore> {
        Ok(load_embeddings(&self.embeddings_path()?)?)
    }

    /// The configured table, else the synthetic one when it exists.
    fn optional_embeddings(&self) -> CliResult<Option<EmbeddingStore>> {
        if self.cfg.inputs.embeddings.is_some() || self.path(SYNTH_EMBEDDINGS).exists() {
            self.embeddings().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn gen_tasks(&self) -> CliResult<Manifest> {
        let kb = self.load_kb()?;
        let available: Option<HashSet<String>> = self
            .optional_embeddings()?
            .map(|s| s.ids().map(str::to_owned).collect());
        let generator = TaskGenerator::new(&kb, &self.cfg.task, available.as_ref());
        let plan = generator.plan(self.cfg.tasks.as_deref());
        let dir = self.path(TASKS_DIR);
        let outcomes = self.pool()?.install(|| {
            plan.jobs
                .par_iter()
                .map(|job| match generator.run(job) {
                    Ok(ds) => {
                        let file = task_file_name(&ds.task_id);
                        write_atomic(&dir.join(&file), ds.to_jsonl()?.as_bytes())?;
                        Ok(Ok(ManifestEntry::for_dataset(&ds, file)))
                    }
                    Err(Error::Generation { task, reason }) => {
                        Ok(Err(GenerationFailure { task, reason }))
                    }
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>, Error>>()
        })?;
        let mut manifest = Manifest {
            seed: self.cfg.seed(),
            config: self.cfg.task.clone(),
            tasks: Vec::new(),
            failures: Vec::new(),
            skipped: plan.skipped,
        };
        for o in outcomes {
            match o {
                Ok(e) => manifest.tasks.push(e),
                Err(f) => manifest.failures.push(f),
            }
        }
        write_atomic(&self.path(MANIFEST), manifest.to_json()?.as_bytes())?;
        Ok(manifest)
    }

    fn probe_one(
        &self,
        entry: &ManifestEntry,
        store: &EmbeddingStore,
    ) -> CliResult<Result<TaskResult, ProbeFailure>> {
        let fail = |reason: String| {
            Ok(Err(ProbeFailure {
                task: entry.task.clone(),
                reason,
            }))
        };
        let mut ds = load_task(&self.path(TASKS_DIR), entry)?;
        let dropped = retain_embedded(&mut ds, store) + entry.stats.dropped_missing_embedding;
        if ds.train.is_empty() || ds.test.is_empty() {
            return fail("no instances left with embeddings".into());
        }
        let model = match probe::train(&ds, store, &self.cfg.probe) {
            Ok(m) => m,
            Err(Error::Training(reason)) => return fail(reason),
            Err(e) => return Err(e.into()),
        };
        let eval = probe::evaluate(&model, &ds, store, Split::Test)?;
        let stem = task_file_name(&ds.task_id)
            .trim_end_matches(".jsonl")
            .to_owned();
        model.save(&self.path(MODELS_DIR).join(format!("{stem}.json")))?;
        if ds.kind.is_classification() {
            let cm = eval.confusion()?;
            write_atomic(
                &self.path(CONFUSION_DIR).join(format!("{stem}.tsv")),
                cm.to_tsv().as_bytes(),
            )?;
        }
        let baseline_rmse = match ds.kind {
            TaskKind::Regression => Some(probe::mean_baseline(&ds)?),
            _ => None,
        };
        Ok(Ok(TaskResult {
            task: ds.task_id.clone(),
            family: ds.family().to_owned(),
            kind: ds.kind,
            n_labels: ds.labels.len(),
            train: ds.train.len(),
            test: ds.test.len(),
            dropped,
            metrics: eval.metrics,
            baseline_rmse,
            epochs: model.log.epochs,
            converged: model.log.converged,
            final_loss: model.log.final_loss,
        }))
    }

    pub fn probe(&self) -> CliResult<ProbeResults> {
        let manifest_path = self.path(MANIFEST);
        require(&manifest_path, "task manifest (run gen-tasks first)")?;
        let manifest = Manifest::load(&manifest_path)?;
        let store = self.embeddings()?;
        let entries: Vec<&ManifestEntry> = manifest
            .tasks
            .iter()
            .filter(|e| self.selected(&e.task))
            .collect();
        let outcomes = self.pool()?.install(|| {
            entries
                .par_iter()
                .map(|e| self.probe_one(e, &store))
                .collect::<CliResult<Vec<_>>>()
        })?;
        let mut results = ProbeResults {
            seed: self.cfg.seed(),
            probe: self.cfg.probe.clone(),
            rows: Vec::new(),
            failures: Vec::new(),
            generation_failures: manifest
                .failures
                .iter()
                .filter(|f| self.selected(&f.task))
                .cloned()
                .collect(),
        };
        for o in outcomes {
            match o {
                Ok(r) => results.rows.push(r),
                Err(f) => results.failures.push(f),
            }
        }
        write_atomic(&self.path(PROBE_RESULTS), &to_json(&results)?)?;
        Ok(results)
    }

    pub fn el(&self) -> CliResult<ElReport> {
        let inputs = &self.cfg.inputs;
        let get = |p: &Option<PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| CliError::Config(format!("el needs `{key}` to be set")))
        };
        let aliases_path = get(&inputs.aliases, "aliases")?;
        let train_path = get(&inputs.el_train, "el_train")?;
        let test_path = get(&inputs.el_test, "el_test")?;
        for (p, what) in [
            (&aliases_path, "aliases file"),
            (&train_path, "el_train file"),
            (&test_path, "el_test file"),
        ] {
            require(p, what)?;
        }
        let kb = self.load_kb()?;
        let index = load_aliases(&aliases_path)?;
        let train = load_mentions(&train_path)?;
        let test = load_mentions(&test_path)?;
        let entities = self.embeddings()?;
        let words = match &inputs.words {
            Some(p) => {
                require(p, "word vectors file")?;
                Some(load_embeddings(p)?)
            }
            None => None,
        };
        let linker = Linker::new(
            &index,
            &kb,
            &entities,
            words.as_ref().unwrap_or(&entities),
            self.cfg.linker.clone(),
        )?;
        let (scorer, training) = match linker.train_hinge(&train) {
            Ok(r) => r,
            Err(Error::Training(reason)) => return Err(CliError::Other(format!("el: {reason}"))),
            Err(e) => return Err(e.into()),
        };
        let baseline =
            linker.evaluate(&test, &LinkScorer::popularity_only(self.cfg.linker.margin))?;
        let result = linker.evaluate(&test, &scorer)?;
        let report = ElReport {
            config: self.cfg.linker.clone(),
            training,
            scorer,
            popularity_baseline: [baseline.micro_p_at_1, baseline.macro_p_at_1],
            test: result,
        };
        write_atomic(&self.path(EL_RESULTS), &to_json(&report)?)?;
        Ok(report)
    }

    pub fn report_path(&self) -> PathBuf {
        match self.cfg.format {
            Format::Tsv => self.path("report/report.tsv"),
            Format::Json => self.path("report/report.json"),
        }
    }

    pub fn report(&self) -> CliResult<PathBuf> {
        let results: ProbeResults =
            read_json(&self.path(PROBE_RESULTS), "probe results (run probe first)")?;
        let el_path = self.path(EL_RESULTS);
        let el: Option<ElReport> = if el_path.exists() {
            Some(read_json(&el_path, "el results")?)
        } else {
            None
        };
        let rows = report::build_rows(&results, el.as_ref(), self.cfg.subtasks);
        if rows.is_empty() {
            return Err(CliError::Other(
                "nothing to report: no probe results".into(),
            ));
        }
        let text = match self.cfg.format {
            Format::Tsv => report::to_tsv(&self.cfg, &rows),
            Format::Json => report::to_json(&self.cfg, &rows)?,
        };
        let out = self.report_path();
        write_atomic(&out, text.as_bytes())?;
        Ok(out)
    }

    fn has_el_inputs(&self) -> bool {
        let i = &self.cfg.inputs;
        i.aliases.is_some() && i.el_train.is_some() && i.el_test.is_some()
    }

    /// ingest, synth (when no table is configured), gen-tasks, probe, el
    /// (when its inputs are configured), report.
    pub fn run_all(&self) -> CliResult<PathBuf> {
        self.ingest()?;
        if self.cfg.inputs.embeddings.is_none() {
            self.synth()?;
        }
        self.gen_tasks()?;
        self.probe()?;
        if self.has_el_inputs() {
            self.el()?;
        }
        self.report()
    }
}
