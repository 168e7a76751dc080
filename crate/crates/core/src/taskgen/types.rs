use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{
    generation_error, split_sample, GenStats, Instance, Label, TaskDataset, TaskGenerator, TaskKind,
};
use crate::error::Result;

impl TaskGenerator<'_> {
    /// N-way classification over every type at `level` with at least
    /// `2 * per_label` members.
    pub fn gen_type_task(&self, level: u8) -> Result<TaskDataset> {
        let task_id = format!("T-{level}");
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let mut members: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in self.kb.ontology.typed_entities() {
            let Some(t) = self.kb.ontology.type_at_level(e, level) else {
                continue;
            };
            if !self.is_available(e) {
                stats.dropped_missing_embedding += 1;
                continue;
            }
            members.entry(t).or_default().push(e);
        }
        for t in self.kb.ontology.types_at_level(level) {
            members.entry(t).or_default();
        }

        let mut labels = Vec::new();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (t, ents) in &members {
            match split_sample(ents, p, &mut rng) {
                Some((a, b)) => {
                    labels.push((*t).to_owned());
                    train.extend(
                        a.into_iter()
                            .map(|e| Instance::single(e, Label::Class((*t).to_owned()))),
                    );
                    test.extend(
                        b.into_iter()
                            .map(|e| Instance::single(e, Label::Class((*t).to_owned()))),
                    );
                }
                None => {
                    stats
                        .skipped
                        .push(format!("type {t}: {} entities < {}", ents.len(), 2 * p))
                }
            }
        }
        if labels.len() < 2 {
            return Err(generation_error(
                &task_id,
                format!("{} qualifying types, need 2", labels.len()),
            ));
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::Multiclass,
            labels,
            train,
            test,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbstore::{parse_ontology, KnowledgeStore};
    use crate::taskgen::TaskConfig;

    #[test]
    fn two_types_four_entities() {
        let o = parse_ontology(
            "A\tROOT\t1\nB\tROOT\t1\nC\tROOT\t1\n".as_bytes(),
            "o",
            "a1\tA\na2\tA\nb1\tB\nb2\tB\nc1\tC\n".as_bytes(),
            "a",
        )
        .unwrap();
        let kb = KnowledgeStore::assemble(
            Default::default(),
            o,
            Default::default(),
            Default::default(),
            Default::default(),
            Default::default(),
            Default::default(),
        );
        let cfg = TaskConfig {
            per_label: 1,
            ..Default::default()
        };
        let ds = TaskGenerator::new(&kb, &cfg, None)
            .gen_type_task(1)
            .unwrap();
        assert_eq!(ds.labels, ["A", "B"]);
        assert_eq!(ds.train.len(), 2);
        assert_eq!(ds.test.len(), 2);
        assert_eq!(ds.stats.skipped.len(), 1);
        let counts = ds.label_counts();
        assert_eq!(counts["A"], (1, 1));
        assert_eq!(counts["B"], (1, 1));
    }
}
