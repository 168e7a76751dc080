use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pairs::{sample_compare_pairs, Candidate};
use super::{
    generation_error, split_sample, GenStats, Instance, Label, TaskDataset, TaskGenerator, TaskKind,
};
use super::{FIRST_LARGER, SECOND_LARGER};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactKind {
    Century,
    Decade,
    Area,
    Population,
    Revenue,
}

impl FactKind {
    pub fn task_id(self, type_restricted: bool) -> String {
        let base = match self {
            FactKind::Century => "F-C",
            FactKind::Decade => "F-D",
            FactKind::Area => "F-A",
            FactKind::Population => "F-P",
            FactKind::Revenue => "F-R",
        };
        if type_restricted {
            format!("{base}+T")
        } else {
            base.to_owned()
        }
    }
}

/// Bucket key (for ordering) and label of a birth year.
pub fn century_label(year: i32) -> (i32, String) {
    let c = year.div_euclid(100);
    (c, format!("{c}xx"))
}

pub fn decade_label(year: i32) -> (i32, String) {
    let d = year.div_euclid(10) * 10;
    (d, format!("{d}s"))
}

type Bucketer = fn(i32) -> (i32, String);

impl TaskGenerator<'_> {
    pub fn gen_factual_task(&self, kind: FactKind, type_restricted: bool) -> Result<TaskDataset> {
        match kind {
            FactKind::Century | FactKind::Decade => self.gen_birth_task(kind),
            _ => self.gen_fact_compare(kind, type_restricted),
        }
    }

    fn gen_birth_task(&self, kind: FactKind) -> Result<TaskDataset> {
        let task_id = kind.task_id(false);
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let (bucket, max_labels): (Bucketer, usize) = match kind {
            FactKind::Century => (century_label, self.cfg.century_labels),
            _ => (decade_label, self.cfg.decade_labels),
        };
        let mut groups: BTreeMap<(i32, String), Vec<&str>> = BTreeMap::new();
        for (e, year) in self.kb.literals.birth_years() {
            if self.is_available(e) {
                groups.entry(bucket(year)).or_default().push(e);
            } else {
                stats.dropped_missing_embedding += 1;
            }
        }
        let mut qualifying: Vec<(&(i32, String), &Vec<&str>)> = Vec::new();
        for (key, members) in &groups {
            if members.len() >= 2 * p {
                qualifying.push((key, members));
            } else {
                stats.skipped.push(format!(
                    "label {}: {} entities < {}",
                    key.1,
                    members.len(),
                    2 * p
                ));
            }
        }
        // keep the most populous labels; earlier labels win ties
        qualifying.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
        for (key, _) in qualifying.iter().skip(max_labels) {
            stats.skipped.push(format!(
                "label {}: beyond the {max_labels} most populous",
                key.1
            ));
        }
        qualifying.truncate(max_labels);
        qualifying.sort_by(|a, b| a.0.cmp(b.0));
        if qualifying.len() < 2 {
            return Err(generation_error(
                &task_id,
                format!("{} qualifying labels, need 2", qualifying.len()),
            ));
        }
        let mut labels = Vec::new();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for ((_, label), members) in qualifying {
            let (a, b) = split_sample(members, p, &mut rng).expect("size checked");
            train.extend(
                a.iter()
                    .map(|e| Instance::single(e, Label::Class(label.clone()))),
            );
            test.extend(
                b.iter()
                    .map(|e| Instance::single(e, Label::Class(label.clone()))),
            );
            labels.push(label.clone());
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

    /// True when `types` is empty or the entity's chain contains one of them.
    fn in_type_set(&self, entity: &str, types: &[String]) -> bool {
        types.is_empty()
            || self
                .kb
                .ontology
                .chain(entity)
                .iter()
                .any(|t| types.contains(t))
    }

    fn gen_fact_compare(&self, kind: FactKind, type_restricted: bool) -> Result<TaskDataset> {
        let task_id = kind.task_id(type_restricted);
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let values: Vec<(&str, f64, String)> = match kind {
            FactKind::Area => self
                .kb
                .literals
                .areas()
                .into_iter()
                .map(|(e, v)| (e, v, String::new()))
                .collect(),
            FactKind::Population => self
                .kb
                .literals
                .populations()
                .into_iter()
                .map(|(e, v)| (e, v, String::new()))
                .collect(),
            _ => self
                .kb
                .literals
                .revenues()
                .into_iter()
                .map(|(e, (v, cur))| (e, v, cur.to_owned()))
                .collect(),
        };
        let types = match kind {
            FactKind::Revenue => &self.cfg.organisation_types,
            _ => &self.cfg.location_types,
        };
        let mut items = Vec::new();
        let mut untyped = 0;
        let mut off_type = 0;
        for (e, value, mut group) in values {
            if !self.is_available(e) {
                stats.dropped_missing_embedding += 1;
                continue;
            }
            if !self.in_type_set(e, types) {
                off_type += 1;
                continue;
            }
            if type_restricted {
                match self.kb.ontology.finest_type(e) {
                    Some(t) => {
                        group.push('\t');
                        group.push_str(t);
                    }
                    None => {
                        untyped += 1;
                        continue;
                    }
                }
            }
            items.push(Candidate {
                id: e.to_owned(),
                value,
                group,
            });
        }
        if off_type > 0 {
            stats
                .skipped
                .push(format!("{off_type} entities outside the configured types"));
        }
        if untyped > 0 {
            stats
                .skipped
                .push(format!("{untyped} entities without a type"));
        }
        let (train, test) =
            sample_compare_pairs(&task_id, items, 1.0, self.cfg.per_label, &mut rng)?;
        Ok(TaskDataset {
            task_id,
            kind: TaskKind::PairwiseBinary,
            labels: vec![FIRST_LARGER.into(), SECOND_LARGER.into()],
            train,
            test,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbstore::{parse_literals, parse_ontology, KnowledgeStore};
    use crate::taskgen::TaskConfig;

    #[test]
    fn birth_labels() {
        assert_eq!(century_label(1879).1, "18xx");
        assert_eq!(decade_label(1879).1, "1870s");
        assert_eq!(century_label(-50).1, "-1xx");
    }

    fn kb(literals: &str, assign: &str) -> KnowledgeStore {
        let lit = parse_literals(literals.as_bytes(), "l").unwrap();
        let ont = parse_ontology(
            "Place\tROOT\t1\nCountry\tPlace\t2\nVillage\tPlace\t2\nCompany\tROOT\t1\n".as_bytes(),
            "o",
            assign.as_bytes(),
            "a",
        )
        .unwrap();
        KnowledgeStore::assemble(
            Default::default(),
            ont,
            Default::default(),
            Default::default(),
            lit,
            Default::default(),
            Default::default(),
        )
    }

    #[test]
    fn type_restricted_pairs_stay_within_type() {
        let mut lit = String::new();
        let mut assign = String::new();
        for i in 0..6 {
            lit.push_str(&format!("c{i}\tpopulation\t{}\n", 1_000_000 + i));
            lit.push_str(&format!("v{i}\tpopulation\t{}\n", 100 + i));
            assign.push_str(&format!("c{i}\tCountry\nv{i}\tVillage\n"));
        }
        let kb = kb(&lit, &assign);
        let cfg = TaskConfig {
            per_label: 2,
            ..Default::default()
        };
        let ds = TaskGenerator::new(&kb, &cfg, None)
            .gen_factual_task(FactKind::Population, true)
            .unwrap();
        assert_eq!(ds.task_id, "F-P+T");
        for inst in ds.train.iter().chain(&ds.test) {
            assert_eq!(inst.inputs[0].as_bytes()[0], inst.inputs[1].as_bytes()[0]);
        }
    }

    #[test]
    fn revenue_pairs_share_currency() {
        let mut lit = String::new();
        for i in 0..8 {
            let cur = if i % 2 == 0 { "USD" } else { "EUR" };
            lit.push_str(&format!("o{i}\trevenue\t{}\t{cur}\n", 10 + i));
        }
        let kb = kb(&lit, "");
        let cfg = TaskConfig {
            per_label: 1,
            ..Default::default()
        };
        let ds = TaskGenerator::new(&kb, &cfg, None)
            .gen_factual_task(FactKind::Revenue, false)
            .unwrap();
        let rev = kb.literals.revenues();
        for inst in ds.train.iter().chain(&ds.test) {
            assert_eq!(
                rev[inst.inputs[0].as_str()].1,
                rev[inst.inputs[1].as_str()].1
            );
        }
    }

    #[test]
    fn century_keeps_most_populous() {
        let mut lit = String::new();
        let years = [1800, 1801, 1802, 1900, 1901, 2000, 2001, 1700];
        for (i, y) in years.iter().enumerate() {
            lit.push_str(&format!("p{i}\tbirthYear\t{y}\n"));
        }
        let kb = kb(&lit, "");
        let cfg = TaskConfig {
            per_label: 1,
            century_labels: 2,
            ..Default::default()
        };
        let ds = TaskGenerator::new(&kb, &cfg, None)
            .gen_factual_task(FactKind::Century, false)
            .unwrap();
        assert_eq!(ds.labels, ["18xx", "19xx"]);
    }
}
