use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    generation_error, split_sample, CorruptionStats, GenStats, Instance, Label, TaskDataset,
    TaskGenerator, TaskKind,
};
use crate::error::Result;
use crate::kbstore::Triple;
use crate::rng::TaskRng;

pub const TRUE_RELATION: &str = "related";
pub const CORRUPTED: &str = "corrupted";
pub const NONE_LABEL: &str = "None";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationMode {
    Identification,
    Classification,
    ClassificationNone,
    Detection,
}

impl RelationMode {
    pub fn family(self) -> &'static str {
        match self {
            RelationMode::Identification => "R-I",
            RelationMode::Classification => "R-C",
            RelationMode::ClassificationNone => "R-C+I",
            RelationMode::Detection => "R-D",
        }
    }
}

type PairSet = HashSet<(String, String)>;

fn pair_key(t: &Triple) -> (String, String) {
    (t.head.clone(), t.tail.clone())
}

impl TaskGenerator<'_> {
    /// Triples of `relation` whose entities both have embeddings, plus the
    /// number dropped for missing ones.
    fn relation_triples(&self, relation: &str) -> (Vec<&Triple>, usize) {
        let mut dropped = 0;
        let kept = self
            .kb
            .triples
            .iter()
            .filter(|t| t.relation == relation)
            .filter(|t| {
                let ok = self.is_available(&t.head) && self.is_available(&t.tail);
                dropped += usize::from(!ok);
                ok
            })
            .collect();
        (kept, dropped)
    }

    /// Relations with at least `2 * per_split` usable triples.
    pub fn qualifying_relations(&self, per_split: usize) -> (Vec<String>, Vec<String>) {
        let mut kept = Vec::new();
        let mut skipped = Vec::new();
        for (r, ts) in self.kb.triples.by_relation() {
            let n = ts
                .iter()
                .filter(|t| self.is_available(&t.head) && self.is_available(&t.tail))
                .count();
            if n >= 2 * per_split {
                kept.push(r.to_owned());
            } else {
                skipped.push(format!("relation {r}: {n} triples < {}", 2 * per_split));
            }
        }
        (kept, skipped)
    }

    /// Draws `n` corruptions of random `sources`, each with an input pair
    /// not yet in `used`.
    #[allow(clippy::too_many_arguments)]
    fn corruptions(
        &self,
        task_id: &str,
        sources: &[&Triple],
        n: usize,
        used: &mut PairSet,
        rng: &mut TaskRng,
        stats: &mut CorruptionStats,
    ) -> Result<Vec<Triple>> {
        let budget = (n * 50).max(100);
        let mut out = Vec::with_capacity(n);
        for _ in 0..budget {
            if out.len() == n {
                break;
            }
            let src = sources[rng.random_range(0..sources.len())];
            match self.corrupter().corrupt(src, &self.cfg.corruption, rng) {
                Ok(c) => {
                    stats.collisions += c.collisions;
                    if used.insert(pair_key(&c.triple)) {
                        stats.record(c.pool);
                        out.push(c.triple);
                    }
                }
                Err(_) => stats.failures += 1,
            }
        }
        if out.len() < n {
            return Err(generation_error(
                task_id,
                format!(
                    "only {} of {n} distinct corruptions for {}",
                    out.len(),
                    sources[0].relation
                ),
            ));
        }
        Ok(out)
    }

    pub fn gen_relation_task(
        &self,
        mode: RelationMode,
        relation: Option<&str>,
    ) -> Result<TaskDataset> {
        match (mode, relation) {
            (RelationMode::Identification, Some(r)) => self.gen_identification(r),
            (RelationMode::Identification, None) => {
                Err(generation_error("R-I", "identification needs a relation"))
            }
            (RelationMode::Detection, _) => self.gen_detection(),
            (m, _) => self.gen_classification(m == RelationMode::ClassificationNone),
        }
    }

    fn gen_identification(&self, relation: &str) -> Result<TaskDataset> {
        let task_id = format!("R-I:{relation}");
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let mut cstats = CorruptionStats::default();
        let (triples, dropped) = self.relation_triples(relation);
        stats.dropped_missing_embedding = dropped;
        let (pos_train, pos_test) = split_sample(&triples, p, &mut rng).ok_or_else(|| {
            generation_error(&task_id, format!("{} triples < {}", triples.len(), 2 * p))
        })?;
        let mut used: PairSet = pos_train
            .iter()
            .chain(&pos_test)
            .map(|t| pair_key(t))
            .collect();
        let neg_train =
            self.corruptions(&task_id, &triples, p, &mut used, &mut rng, &mut cstats)?;
        let neg_test = self.corruptions(&task_id, &triples, p, &mut used, &mut rng, &mut cstats)?;
        let train = binary_split(&pos_train, &neg_train, &mut rng);
        let test = binary_split(&pos_test, &neg_test, &mut rng);
        stats.corruption = Some(cstats);
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::PairwiseBinary,
            labels: vec![CORRUPTED.into(), TRUE_RELATION.into()],
            train,
            test,
            stats,
        })
    }

    fn gen_detection(&self) -> Result<TaskDataset> {
        let task_id = "R-D".to_owned();
        let d = self.cfg.detection_per_relation;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let mut cstats = CorruptionStats::default();
        let (relations, skipped) = self.qualifying_relations(d);
        stats.skipped = skipped;
        let mut used = PairSet::new();
        let (mut pos_train, mut pos_test, mut neg_train, mut neg_test) =
            (vec![], vec![], vec![], vec![]);
        for r in &relations {
            let (triples, dropped) = self.relation_triples(r);
            stats.dropped_missing_embedding += dropped;
            let fresh: Vec<&Triple> = triples
                .iter()
                .copied()
                .filter(|t| !used.contains(&pair_key(t)))
                .collect();
            let Some((a, b)) = split_sample(&fresh, d, &mut rng) else {
                stats.skipped.push(format!(
                    "relation {r}: pairs already used by other relations"
                ));
                continue;
            };
            used.extend(a.iter().chain(&b).map(|t| pair_key(t)));
            neg_train.extend(self.corruptions(
                &task_id,
                &triples,
                d,
                &mut used,
                &mut rng,
                &mut cstats,
            )?);
            neg_test.extend(self.corruptions(
                &task_id,
                &triples,
                d,
                &mut used,
                &mut rng,
                &mut cstats,
            )?);
            pos_train.extend(a);
            pos_test.extend(b);
        }
        if pos_train.is_empty() {
            return Err(generation_error(&task_id, "no relation has enough triples"));
        }
        let train = binary_split(&pos_train, &neg_train, &mut rng);
        let test = binary_split(&pos_test, &neg_test, &mut rng);
        stats.corruption = Some(cstats);
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::PairwiseBinary,
            labels: vec![CORRUPTED.into(), TRUE_RELATION.into()],
            train,
            test,
            stats,
        })
    }

    fn gen_classification(&self, with_none: bool) -> Result<TaskDataset> {
        let task_id = if with_none { "R-C+I" } else { "R-C" }.to_owned();
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let mut cstats = CorruptionStats::default();
        let (relations, skipped) = self.qualifying_relations(p);
        stats.skipped = skipped;
        let mut used = PairSet::new();
        let mut labels = Vec::new();
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut sources: Vec<Vec<&Triple>> = Vec::new();
        for r in &relations {
            let (triples, dropped) = self.relation_triples(r);
            stats.dropped_missing_embedding += dropped;
            let fresh: Vec<&Triple> = triples
                .iter()
                .copied()
                .filter(|t| !used.contains(&pair_key(t)))
                .collect();
            let Some((a, b)) = split_sample(&fresh, p, &mut rng) else {
                stats
                    .skipped
                    .push(format!("relation {r}: only {} unshared pairs", fresh.len()));
                continue;
            };
            used.extend(a.iter().chain(&b).map(|t| pair_key(t)));
            let label = || Label::Class(r.clone());
            train.extend(a.iter().map(|t| Instance::pair(&t.head, &t.tail, label())));
            test.extend(b.iter().map(|t| Instance::pair(&t.head, &t.tail, label())));
            labels.push(r.clone());
            sources.push(triples);
        }
        if labels.len() < 2 {
            return Err(generation_error(
                &task_id,
                format!("{} qualifying relations, need 2", labels.len()),
            ));
        }
        if with_none {
            let n = self.cfg.none_per_relation;
            for src in &sources {
                for split in [&mut train, &mut test] {
                    let negs =
                        self.corruptions(&task_id, src, n, &mut used, &mut rng, &mut cstats)?;
                    split.extend(negs.iter().map(|t| {
                        Instance::pair(&t.head, &t.tail, Label::Class(NONE_LABEL.into()))
                    }));
                }
            }
            labels.push(NONE_LABEL.into());
            stats.corruption = Some(cstats);
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::PairwiseMulticlass,
            labels,
            train,
            test,
            stats,
        })
    }
}

fn binary_split(pos: &[&Triple], neg: &[Triple], rng: &mut TaskRng) -> Vec<Instance> {
    let mut v: Vec<Instance> = pos
        .iter()
        .map(|t| Instance::pair(&t.head, &t.tail, Label::Class(TRUE_RELATION.into())))
        .chain(
            neg.iter()
                .map(|t| Instance::pair(&t.head, &t.tail, Label::Class(CORRUPTED.into()))),
        )
        .collect();
    v.shuffle(rng);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbstore::{parse_ontology, parse_triples, KnowledgeStore};
    use crate::taskgen::TaskConfig;

    fn kb() -> KnowledgeStore {
        let mut triples = String::new();
        let mut assign = String::new();
        for i in 0..6 {
            assign.push_str(&format!("p{i}\tPerson\nc{i}\tCity\nt{i}\tTeam\n"));
        }
        for i in 0..4 {
            triples.push_str(&format!("p{i}\tbirthPlace\tc{i}\n"));
            triples.push_str(&format!("p{i}\tteam\tt{}\n", i % 2));
        }
        let (t, s) = parse_triples(triples.as_bytes(), "t").unwrap();
        let o = parse_ontology(
            "Person\tROOT\t1\nCity\tROOT\t1\nTeam\tROOT\t1\n".as_bytes(),
            "o",
            assign.as_bytes(),
            "a",
        )
        .unwrap();
        KnowledgeStore::assemble(
            Default::default(),
            o,
            t,
            s,
            Default::default(),
            Default::default(),
            Default::default(),
        )
    }

    #[test]
    fn classification_fixture() {
        let kb = kb();
        let cfg = TaskConfig {
            per_label: 1,
            ..Default::default()
        };
        let g = TaskGenerator::new(&kb, &cfg, None);
        let ds = g
            .gen_relation_task(RelationMode::Classification, None)
            .unwrap();
        assert_eq!(ds.labels, ["birthPlace", "team"]);
        assert_eq!(ds.train.len(), 2);
        assert_eq!(ds.test.len(), 2);
    }

    #[test]
    fn identification_is_balanced_and_sound() {
        let kb = kb();
        let cfg = TaskConfig {
            per_label: 2,
            ..Default::default()
        };
        let g = TaskGenerator::new(&kb, &cfg, None);
        let ds = g
            .gen_relation_task(RelationMode::Identification, Some("birthPlace"))
            .unwrap();
        for (_, (a, b)) in ds.label_counts() {
            assert_eq!((a, b), (2, 2));
        }
        let mut seen = HashSet::new();
        for inst in ds.train.iter().chain(&ds.test) {
            assert!(
                seen.insert(inst.inputs.clone()),
                "duplicate pair {:?}",
                inst.inputs
            );
            let t = Triple::new(&inst.inputs[0], "birthPlace", &inst.inputs[1]);
            assert_eq!(
                inst.label.class() == Some(TRUE_RELATION),
                kb.triples.contains(&t)
            );
        }
    }

    #[test]
    fn none_label_counts() {
        let kb = kb();
        let cfg = TaskConfig {
            per_label: 1,
            none_per_relation: 3,
            ..Default::default()
        };
        let g = TaskGenerator::new(&kb, &cfg, None);
        let ds = g
            .gen_relation_task(RelationMode::ClassificationNone, None)
            .unwrap();
        assert_eq!(ds.labels.last().unwrap(), NONE_LABEL);
        let counts = ds.label_counts();
        assert_eq!(counts[NONE_LABEL], (6, 6));
        assert_eq!(counts["team"], (1, 1));
    }

    #[test]
    fn detection_pools_relations() {
        let kb = kb();
        let cfg = TaskConfig {
            detection_per_relation: 1,
            ..Default::default()
        };
        let ds = TaskGenerator::new(&kb, &cfg, None)
            .gen_relation_task(RelationMode::Detection, None)
            .unwrap();
        let counts = ds.label_counts();
        assert_eq!(counts[TRUE_RELATION], (2, 2));
        assert_eq!(counts[CORRUPTED], (2, 2));
    }
}
