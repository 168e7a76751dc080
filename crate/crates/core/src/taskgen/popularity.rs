use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pairs::{sample_compare_pairs, Candidate};
use super::{
    generation_error, split_sample, GenStats, Instance, Label, TaskDataset, TaskGenerator, TaskKind,
};
use super::{FIRST_LARGER, SECOND_LARGER};
use crate::error::Result;

/// Link-count bins, upper-inclusive, in ascending order.
pub const POPULARITY_BINS: [(&str, u64, u64); 4] = [
    ("1-10", 1, 10),
    ("10-100", 11, 100),
    ("100-1000", 101, 1000),
    (">1000", 1001, u64::MAX),
];

pub fn popularity_bin(count: u64) -> Option<&'static str> {
    POPULARITY_BINS
        .iter()
        .find(|(_, lo, hi)| (*lo..=*hi).contains(&count))
        .map(|(name, _, _)| *name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopKind {
    Regression,
    Binned,
    Compare { ratio: u32 },
}

impl PopKind {
    pub const ALL: [PopKind; 6] = [
        PopKind::Regression,
        PopKind::Binned,
        PopKind::Compare { ratio: 1 },
        PopKind::Compare { ratio: 2 },
        PopKind::Compare { ratio: 5 },
        PopKind::Compare { ratio: 10 },
    ];

    pub fn task_id(self) -> &'static str {
        match self {
            PopKind::Regression => "P-R",
            PopKind::Binned => "P-B",
            PopKind::Compare { ratio: 1 } => "P-Any",
            PopKind::Compare { ratio: 2 } => "P-2",
            PopKind::Compare { ratio: 5 } => "P-5",
            PopKind::Compare { ratio: 10 } => "P-10",
            PopKind::Compare { .. } => "P-ratio",
        }
    }
}

impl TaskGenerator<'_> {
    fn popularity_universe(&self, stats: &mut GenStats) -> Vec<(&str, u64)> {
        let mut out = Vec::new();
        for id in self.kb.entity_ids() {
            if self.is_available(id) {
                out.push((id, self.kb.popularity.count(id)));
            } else {
                stats.dropped_missing_embedding += 1;
            }
        }
        out
    }

    pub fn gen_popularity_task(&self, kind: PopKind) -> Result<TaskDataset> {
        let task_id = kind.task_id().to_owned();
        let p = self.cfg.per_label;
        let mut rng = self.rng(&task_id);
        let mut stats = GenStats::default();
        let universe = self.popularity_universe(&mut stats);
        let (kind_out, labels, train, test) = match kind {
            PopKind::Regression => {
                let (a, b) = split_sample(&universe, p, &mut rng).ok_or_else(|| {
                    generation_error(&task_id, format!("{} entities < {}", universe.len(), 2 * p))
                })?;
                let inst = |(id, m): &(&str, u64)| {
                    Instance::single(id, Label::Value((1.0 + *m as f64).ln()))
                };
                let train = a.iter().map(inst).collect();
                let test = b.iter().map(inst).collect();
                (TaskKind::Regression, Vec::new(), train, test)
            }
            PopKind::Binned => {
                let mut train = Vec::new();
                let mut test = Vec::new();
                let mut short = Vec::new();
                for (name, _, _) in POPULARITY_BINS {
                    let members: Vec<&str> = universe
                        .iter()
                        .filter(|(_, m)| popularity_bin(*m) == Some(name))
                        .map(|(id, _)| *id)
                        .collect();
                    match split_sample(&members, p, &mut rng) {
                        Some((a, b)) => {
                            train.extend(
                                a.iter()
                                    .map(|id| Instance::single(id, Label::Class(name.into()))),
                            );
                            test.extend(
                                b.iter()
                                    .map(|id| Instance::single(id, Label::Class(name.into()))),
                            );
                        }
                        None => short.push(format!(
                            "bin {name}: {} entities < {}",
                            members.len(),
                            2 * p
                        )),
                    }
                }
                if !short.is_empty() {
                    return Err(generation_error(&task_id, short.join("; ")));
                }
                train.shuffle(&mut rng);
                test.shuffle(&mut rng);
                let labels = POPULARITY_BINS
                    .iter()
                    .map(|(n, _, _)| n.to_string())
                    .collect();
                (TaskKind::Multiclass, labels, train, test)
            }
            PopKind::Compare { ratio } => {
                let items = universe
                    .iter()
                    .filter(|(_, m)| *m >= 1)
                    .map(|(id, m)| Candidate {
                        id: id.to_string(),
                        value: *m as f64,
                        group: String::new(),
                    })
                    .collect();
                let (train, test) =
                    sample_compare_pairs(&task_id, items, ratio as f64, p, &mut rng)?;
                let labels = vec![FIRST_LARGER.into(), SECOND_LARGER.into()];
                (TaskKind::PairwiseBinary, labels, train, test)
            }
        };
        Ok(TaskDataset {
            task_id,
            kind: kind_out,
            labels,
            train,
            test,
            stats,
        })
    }
}
