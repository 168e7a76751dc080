//! Flat `key = value` run configuration. Later assignments win, so flags are
//! applied after the file.

use std::path::{Path, PathBuf};

use entprobe::embedstore::SynthSpec;
use entprobe::kbstore::{FrequencyBands, KbPaths, DEFAULT_DESC_LIMIT, DEFAULT_WINDOW};
use entprobe::linker::LinkerConfig;
use entprobe::probe::ProbeConfig;
use entprobe::taskgen::{CorruptionConfig, TaskConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub entities: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub literals: Option<PathBuf>,
    pub popularity: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Word vectors for linker contexts; defaults to `embeddings`.
    pub words: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub el_train: Option<PathBuf>,
    pub el_test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub out: PathBuf,
    pub jobs: usize,
    pub format: Format,
    /// Emit per-subtask rows under W-H, W-M and R-I aggregates.
    pub subtasks: bool,
    /// Family ids or exact task ids; `None` selects everything.
    pub tasks: Option<Vec<String>>,
    pub window: usize,
    pub desc_limit: usize,
    pub task: TaskConfig,
    pub probe: ProbeConfig,
    pub synth: SynthSpec,
    pub linker: LinkerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Inputs::default(),
            out: PathBuf::from("out"),
            jobs: 1,
            format: Format::Tsv,
            subtasks: false,
            tasks: None,
            window: DEFAULT_WINDOW,
            desc_limit: DEFAULT_DESC_LIMIT,
            task: TaskConfig::default(),
            probe: ProbeConfig::default(),
            synth: SynthSpec::default(),
            linker: LinkerConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "-".to_owned(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    /// Applies every assignment in `path`. Relative paths resolve against the
    /// file's directory.
    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text =
            std::fs::read_to_string(path).map_err(|_| CliError::missing("config file", path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    i + 1
                ))
            })?;
            self.set(k.trim(), v.trim(), base)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    /// Sets one key. Relative path values are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> CliResult<()> {
        let path = || Some(base.join(value));
        let i = &mut self.inputs;
        match key {
            "entities" => i.entities = path(),
            "triples" => i.triples = path(),
            "ontology" => i.ontology = path(),
            "assignments" => i.assignments = path(),
            "literals" => i.literals = path(),
            "popularity" => i.popularity = path(),
            "descriptions" => i.descriptions = path(),
            "mentions" => i.mentions = path(),
            "embeddings" => i.embeddings = path(),
            "words" => i.words = path(),
            "aliases" => i.aliases = path(),
            "el_train" => i.el_train = path(),
            "el_test" => i.el_test = path(),
            "out" => self.out = base.join(value),
            "jobs" => self.jobs = parse(key, value)?,
            "format" => {
                self.format = match value {
                    "tsv" => Format::Tsv,
                    "json" => Format::Json,
                    _ => {
                        return Err(CliError::Config(format!(
                            "format: expected tsv or json, got {value:?}"
                        )))
                    }
                }
            }
            "subtasks" => self.subtasks = parse_bool(key, value)?,
            "tasks" => {
                let l = parse_list(value);
                self.tasks = (!l.is_empty()).then_some(l);
            }
            "seed" => {
                let s: u64 = parse(key, value)?;
                self.task.seed = s;
                self.probe.seed = s;
                self.synth.seed = s;
                self.linker.seed = s;
            }
            "window" => self.window = parse(key, value)?,
            "desc_limit" => self.desc_limit = parse(key, value)?,
            "per_label" => self.task.per_label = parse(key, value)?,
            "n_words" => self.task.n_words = parse(key, value)?,
            "high_min" => self.task.bands.high_min = parse(key, value)?,
            "mid_min" => self.task.bands.mid_min = parse(key, value)?,
            "detection_per_relation" => self.task.detection_per_relation = parse(key, value)?,
            "none_per_relation" => self.task.none_per_relation = parse(key, value)?,
            "century_labels" => self.task.century_labels = parse(key, value)?,
            "decade_labels" => self.task.decade_labels = parse(key, value)?,
            "location_types" => self.task.location_types = parse_list(value),
            "organisation_types" => self.task.organisation_types = parse_list(value),
            "max_resample_attempts" => {
                self.task.corruption.max_resample_attempts = parse(key, value)?
            }
            "l2" => self.probe.l2 = parse(key, value)?,
            "max_epochs" => self.probe.max_epochs = parse(key, value)?,
            "tol" => self.probe.tol = parse(key, value)?,
            "huber_delta" => self.probe.huber_delta = parse(key, value)?,
            "standardize" => self.probe.standardize = parse_bool(key, value)?,
            "synth_dim" => self.synth.dim = parse(key, value)?,
            "synth_sigma" => self.synth.sigma = parse(key, value)?,
            "synth_levels" => {
                self.synth.type_levels = parse_list(value)
                    .iter()
                    .map(|v| parse(key, v))
                    .collect::<CliResult<_>>()?
            }
            "synth_popularity" => self.synth.popularity = parse_bool(key, value)?,
            "synth_relations" => self.synth.relations = parse_list(value),
            "synth_relation_block" => self.synth.relation_block = parse(key, value)?,
            "synth_filler_std" => self.synth.filler_std = parse(key, value)?,
            "el_candidates" => self.linker.candidates = parse(key, value)?,
            "el_window" => self.linker.window = parse(key, value)?,
            "el_margin" => self.linker.margin = parse(key, value)?,
            "el_learning_rate" => self.linker.learning_rate = parse(key, value)?,
            "el_max_epochs" => self.linker.max_epochs = parse(key, value)?,
            "el_patience" => self.linker.patience = parse(key, value)?,
            "el_validation_fraction" => self.linker.validation_fraction = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_owned()));
        if self.jobs == 0 {
            return bad("jobs must be >= 1");
        }
        if self.task.per_label == 0 {
            return bad("per_label must be >= 1");
        }
        if self.window == 0 || self.desc_limit == 0 {
            return bad("window and desc_limit must be >= 1");
        }
        if self.task.bands.mid_min >= self.task.bands.high_min {
            return bad("mid_min must be below high_min");
        }
        if self.task.corruption.max_resample_attempts == 0 {
            return bad("max_resample_attempts must be >= 1");
        }
        if self.linker.candidates == 0 || self.linker.patience == 0 {
            return bad("el_candidates and el_patience must be >= 1");
        }
        if !(0.0..1.0).contains(&self.linker.validation_fraction) {
            return bad("el_validation_fraction must be in [0, 1)");
        }
        if self.synth.dim == 0 {
            return bad("synth_dim must be >= 1");
        }
        self.probe
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.task.seed
    }

    pub fn kb_paths(&self) -> KbPaths {
        let i = &self.inputs;
        KbPaths {
            entities: i.entities.clone(),
            triples: i.triples.clone(),
            ontology: i.ontology.clone(),
            assignments: i.assignments.clone(),
            literals: i.literals.clone(),
            popularity: i.popularity.clone(),
            descriptions: i.descriptions.clone(),
            mentions: i.mentions.clone(),
        }
    }

    pub fn bands(&self) -> FrequencyBands {
        self.task.bands
    }

    pub fn corruption(&self) -> CorruptionConfig {
        self.task.corruption.clone()
    }

    /// Every setting that can change an output, as `(key, value)` in a fixed
    /// order. The output directory and worker count are left out.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let i = &self.inputs;
        let t = &self.task;
        let p = &self.probe;
        let s = &self.synth;
        let l = &self.linker;
        vec![
            ("seed", t.seed.to_string()),
            (
                "tasks",
                self.tasks
                    .as_ref()
                    .map_or_else(|| "all".into(), |v| join(v)),
            ),
            ("per_label", t.per_label.to_string()),
            ("n_words", t.n_words.to_string()),
            ("window", self.window.to_string()),
            ("desc_limit", self.desc_limit.to_string()),
            ("high_min", t.bands.high_min.to_string()),
            ("mid_min", t.bands.mid_min.to_string()),
            (
                "detection_per_relation",
                t.detection_per_relation.to_string(),
            ),
            ("none_per_relation", t.none_per_relation.to_string()),
            ("century_labels", t.century_labels.to_string()),
            ("decade_labels", t.decade_labels.to_string()),
            ("location_types", join(&t.location_types)),
            ("organisation_types", join(&t.organisation_types)),
            (
                "max_resample_attempts",
                t.corruption.max_resample_attempts.to_string(),
            ),
            ("l2", p.l2.to_string()),
            ("max_epochs", p.max_epochs.to_string()),
            ("tol", p.tol.to_string()),
            ("huber_delta", p.huber_delta.to_string()),
            ("standardize", p.standardize.to_string()),
            ("synth_dim", s.dim.to_string()),
            ("synth_sigma", s.sigma.to_string()),
            ("synth_levels", join(&s.type_levels)),
            ("synth_popularity", s.popularity.to_string()),
            ("synth_relations", join(&s.relations)),
            ("synth_relation_block", s.relation_block.to_string()),
            ("synth_filler_std", s.filler_std.to_string()),
            ("el_candidates", l.candidates.to_string()),
            ("el_window", l.window.to_string()),
            ("el_margin", l.margin.to_string()),
            ("el_learning_rate", l.learning_rate.to_string()),
            ("el_max_epochs", l.max_epochs.to_string()),
            ("el_patience", l.patience.to_string()),
            ("el_validation_fraction", l.validation_fraction.to_string()),
            ("entities", show_path(&i.entities)),
            ("triples", show_path(&i.triples)),
            ("ontology", show_path(&i.ontology)),
            ("assignments", show_path(&i.assignments)),
            ("literals", show_path(&i.literals)),
            ("popularity", show_path(&i.popularity)),
            ("descriptions", show_path(&i.descriptions)),
            ("mentions", show_path(&i.mentions)),
            ("embeddings", show_path(&i.embeddings)),
            ("words", show_path(&i.words)),
            ("aliases", show_path(&i.aliases)),
            ("el_train", show_path(&i.el_train)),
            ("el_test", show_path(&i.el_test)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# toy\nper_label = 7\ntriples = data/t.tsv  # relative\nseed=3\n",
        )
        .unwrap();
        let mut cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.task.per_label, 7);
        assert_eq!(cfg.inputs.triples, Some(dir.path().join("data/t.tsv")));
        assert_eq!(cfg.probe.seed, 3);
        cfg.set("per_label", "9", Path::new("")).unwrap();
        assert_eq!(cfg.task.per_label, 9);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("per_label", "x"),
            ("nonsense", "1"),
            ("format", "xml"),
            ("standardize", "maybe"),
        ] {
            let e = cfg.set(k, v, Path::new("")).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{k}");
        }
        cfg.jobs = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn missing_config_file_exits_2() {
        let e = RunConfig::from_file(Path::new("/nonexistent/run.conf")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("/nonexistent/run.conf"));
    }
}
