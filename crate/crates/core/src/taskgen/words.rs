use rand::seq::SliceRandom;

use super::{
    generation_error, split_sample, GenStats, Instance, Label, TaskDataset, TaskGenerator, TaskKind,
};
use crate::error::Result;
use crate::kbstore::Band;

pub const ABSENT: &str = "absent";
pub const PRESENT: &str = "present";

impl TaskGenerator<'_> {
    /// Entities that have a context set, i.e. a description and at least one
    /// mention window.
    fn context_universe(&self) -> Vec<&str> {
        self.kb
            .context
            .described_entities()
            .filter(|e| self.kb.context.context(e).is_some() && self.is_available(e))
            .collect()
    }

    /// Picks up to `n_words` qualifying words of `band`. A word qualifies with
    /// at least `2 * per_label` positive and negative entities.
    pub fn select_words(&self, band: Band) -> (Vec<String>, Vec<String>) {
        let need = 2 * self.cfg.per_label;
        let universe = self.context_universe().len();
        let mut skipped = Vec::new();
        let mut qualifying = Vec::new();
        for w in self.kb.context.band_words(&self.cfg.bands, band) {
            let pos = self
                .kb
                .context
                .entities_with_word(w)
                .into_iter()
                .filter(|e| self.is_available(e))
                .count();
            if pos < need || universe - pos < need {
                skipped.push(format!(
                    "word {w}: {pos} positives, {} negatives, need {need}",
                    universe - pos
                ));
            } else {
                qualifying.push(w.to_owned());
            }
        }
        let mut rng = self.rng(&format!("{}/select", band.family()));
        qualifying.shuffle(&mut rng);
        if qualifying.len() < self.cfg.n_words {
            skipped.push(format!(
                "only {} of {} requested words qualify",
                qualifying.len(),
                self.cfg.n_words
            ));
        }
        qualifying.truncate(self.cfg.n_words);
        qualifying.sort();
        (qualifying, skipped)
    }

    /// Binary task: does `word` occur in the entity's context words.
    pub fn gen_word_task(&self, band: Band, word: &str) -> Result<TaskDataset> {
        let task_id = format!("{}:{word}", band.family());
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for e in self.kb.context.described_entities() {
            if self.kb.context.context(e).is_none() {
                continue;
            }
            if !self.is_available(e) {
                stats.dropped_missing_embedding += 1;
                continue;
            }
            if self.kb.context.has_context_word(e, word) {
                positives.push(e);
            } else {
                negatives.push(e);
            }
        }
        let (pos_train, pos_test) = split_sample(&positives, p, &mut rng).ok_or_else(|| {
            generation_error(
                &task_id,
                format!("{} positives < {}", positives.len(), 2 * p),
            )
        })?;
        let (neg_train, neg_test) = split_sample(&negatives, p, &mut rng).ok_or_else(|| {
            generation_error(
                &task_id,
                format!("{} negatives < {}", negatives.len(), 2 * p),
            )
        })?;
        let build = |pos: Vec<&str>, neg: Vec<&str>, rng: &mut _| {
            let mut v: Vec<Instance> = pos
                .into_iter()
                .map(|e| Instance::single(e, Label::Class(PRESENT.into())))
                .chain(
                    neg.into_iter()
                        .map(|e| Instance::single(e, Label::Class(ABSENT.into()))),
                )
                .collect();
            v.shuffle(rng);
            v
        };
        let train = build(pos_train, neg_train, &mut rng);
        let test = build(pos_test, neg_test, &mut rng);
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::Binary,
            labels: vec![ABSENT.into(), PRESENT.into()],
            train,
            test,
            stats,
        })
    }
}
