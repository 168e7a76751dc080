//! Type-restricted triple corruption.
//!
//! The side to replace is chosen with probability
//! `P(head) = headCount(h) / (headCount(h) + tailCount(t))`, so in N-to-1
//! relations the shared entity is replaced most of the time. The
//! replacement shares the replaced entity's finest type when any such
//! candidate exists, falling back to coarser ancestors and finally to the
//! entities seen in the same role for the relation.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbstore::{KnowledgeStore, Triple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub max_resample_attempts: usize,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            max_resample_attempts: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

/// Which candidate pool a replacement came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolKind {
    FinestType,
    CoarserType { level: u8 },
    Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionOutcome {
    pub triple: Triple,
    pub side: Side,
    pub pool: PoolKind,
    /// Draws rejected because they hit a known positive.
    pub collisions: usize,
}

/// Candidate pools indexed once per knowledge store.
pub struct Corrupter<'a> {
    kb: &'a KnowledgeStore,
    finest: HashMap<&'a str, Vec<&'a str>>,
    by_type: HashMap<&'a str, Vec<&'a str>>,
    /// relation -> (head role, tail role)
    roles: HashMap<&'a str, (Vec<&'a str>, Vec<&'a str>)>,
}

fn keep<'a>(
    groups: BTreeMap<&'a str, Vec<&'a str>>,
    available: Option<&HashSet<String>>,
) -> HashMap<&'a str, Vec<&'a str>> {
    groups
        .into_iter()
        .map(|(k, v)| {
            let v = v
                .into_iter()
                .filter(|e| available.is_none_or(|a| a.contains(*e)))
                .collect();
            (k, v)
        })
        .collect()
}

impl<'a> Corrupter<'a> {
    pub fn new(kb: &'a KnowledgeStore, available: Option<&HashSet<String>>) -> Self {
        let finest = keep(kb.ontology.entities_by_finest_type(), available);
        let by_type = keep(kb.ontology.entities_by_type(), available);
        let ok = |e: &&str| available.is_none_or(|a| a.contains(*e));
        let roles = kb
            .stats
            .relations()
            .filter_map(|r| {
                let rc = kb.stats.get(r)?;
                Some((
                    r,
                    (
                        rc.head_role().filter(ok).collect(),
                        rc.tail_role().filter(ok).collect(),
                    ),
                ))
            })
            .collect();
        Corrupter {
            kb,
            finest,
            by_type,
            roles,
        }
    }

    /// Probability of replacing the head of `triple`.
    pub fn head_probability(&self, triple: &Triple) -> f64 {
        let hc = self.kb.stats.head_count(&triple.relation, &triple.head) as f64;
        let tc = self.kb.stats.tail_count(&triple.relation, &triple.tail) as f64;
        if hc + tc == 0.0 {
            0.5
        } else {
            hc / (hc + tc)
        }
    }

    /// Candidate pool for replacing `entity` in `side` of `relation`, with
    /// `entity` itself possibly still inside it.
    pub fn pool(&self, entity: &str, side: Side, relation: &str) -> Option<(PoolKind, &[&'a str])> {
        let chain = self.kb.ontology.chain(entity);
        let has_other = |p: &[&str]| p.iter().any(|e| *e != entity);
        for (depth, t) in chain.iter().enumerate().rev() {
            let (kind, pool) = if depth + 1 == chain.len() {
                (PoolKind::FinestType, self.finest.get(t.as_str()))
            } else {
                (
                    PoolKind::CoarserType {
                        level: (depth + 1) as u8,
                    },
                    self.by_type.get(t.as_str()),
                )
            };
            if let Some(p) = pool.filter(|p| has_other(p)) {
                return Some((kind, p.as_slice()));
            }
        }
        let (heads, tails) = self.roles.get(relation)?;
        let role = match side {
            Side::Head => heads,
            Side::Tail => tails,
        };
        has_other(role).then_some((PoolKind::Role, role.as_slice()))
    }

    /// Corrupts one slot of `triple`. Errors when no candidate pool exists or
    /// every attempt produced a known positive.
    pub fn corrupt(
        &self,
        triple: &Triple,
        cfg: &CorruptionConfig,
        rng: &mut impl Rng,
    ) -> Result<CorruptionOutcome> {
        if cfg.max_resample_attempts == 0 {
            return Err(Error::Invalid("max_resample_attempts must be >= 1".into()));
        }
        let side = if rng.random::<f64>() < self.head_probability(triple) {
            Side::Head
        } else {
            Side::Tail
        };
        let replaced = match side {
            Side::Head => triple.head.as_str(),
            Side::Tail => triple.tail.as_str(),
        };
        let (pool_kind, pool) =
            self.pool(replaced, side, &triple.relation)
                .ok_or_else(|| Error::Generation {
                    task: triple.relation.clone(),
                    reason: format!("no replacement candidates for {replaced}"),
                })?;
        let self_pos = pool.binary_search(&replaced).ok();
        let n = pool.len() - usize::from(self_pos.is_some());
        let mut collisions = 0;
        for _ in 0..cfg.max_resample_attempts {
            let mut idx = rng.random_range(0..n);
            if self_pos.is_some_and(|p| idx >= p) {
                idx += 1;
            }
            let replacement = pool[idx];
            let candidate = match side {
                Side::Head => Triple::new(replacement, &triple.relation, &triple.tail),
                Side::Tail => Triple::new(&triple.head, &triple.relation, replacement),
            };
            if self.kb.triples.contains(&candidate) {
                collisions += 1;
                continue;
            }
            return Ok(CorruptionOutcome {
                triple: candidate,
                side,
                pool: pool_kind,
                collisions,
            });
        }
        Err(Error::Generation {
            task: triple.relation.clone(),
            reason: format!(
                "all {} replacements of {replaced} collided with positives",
                cfg.max_resample_attempts
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbstore::{parse_ontology, parse_triples};
    use crate::rng;

    fn kb(triples: &str, types: &str, assign: &str) -> KnowledgeStore {
        let (t, s) = parse_triples(triples.as_bytes(), "t").unwrap();
        let o = parse_ontology(types.as_bytes(), "o", assign.as_bytes(), "a").unwrap();
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
    fn side_probability_follows_role_counts() {
        let triples: String = (0..99).map(|i| format!("H{i}\tcountry\tX\n")).collect();
        let store = kb(&triples, "", "");
        let c = Corrupter::new(&store, None);
        let p = c.head_probability(&Triple::new("H0", "country", "X"));
        assert!((p - 0.01).abs() < 1e-12);
    }

    #[test]
    fn replacement_matches_finest_type() {
        let store = kb(
            "a1\tteam\tc1\na2\tteam\tc1\n",
            "Person\tROOT\t1\nAthlete\tPerson\t2\nPlace\tROOT\t1\nCity\tPlace\t2\nClub\tROOT\t1\n",
            "a1\tAthlete\na2\tAthlete\na3\tAthlete\nx1\tCity\nx2\tCity\nc1\tClub\nc2\tClub\n",
        );
        let c = Corrupter::new(&store, None);
        let mut r = rng::stream(1, "test");
        for _ in 0..200 {
            let out = c
                .corrupt(
                    &Triple::new("a1", "team", "c1"),
                    &CorruptionConfig::default(),
                    &mut r,
                )
                .unwrap();
            let replaced = match out.side {
                Side::Head => &out.triple.head,
                Side::Tail => &out.triple.tail,
            };
            let source = match out.side {
                Side::Head => "a1",
                Side::Tail => "c1",
            };
            assert_eq!(
                store.ontology.finest_type(replaced),
                store.ontology.finest_type(source)
            );
            assert_eq!(out.pool, PoolKind::FinestType);
            assert!(!store.triples.contains(&out.triple));
        }
    }

    #[test]
    fn singleton_type_falls_back_to_ancestor() {
        let store = kb(
            "p1\tknows\tp2\n",
            "Person\tROOT\t1\nAthlete\tPerson\t2\nArtist\tPerson\t2\n",
            "p1\tAthlete\np2\tArtist\np3\tArtist\n",
        );
        let c = Corrupter::new(&store, None);
        let (kind, _) = c.pool("p1", Side::Head, "knows").unwrap();
        assert_eq!(kind, PoolKind::CoarserType { level: 1 });
        let (kind, _) = c.pool("p2", Side::Tail, "knows").unwrap();
        assert_eq!(kind, PoolKind::FinestType);
    }

    #[test]
    fn untyped_entity_uses_role_set() {
        let store = kb("u1\tr\tX\nu2\tr\tY\nX\tr\tu3\n", "", "");
        let c = Corrupter::new(&store, None);
        let (kind, pool) = c.pool("u1", Side::Head, "r").unwrap();
        assert_eq!(kind, PoolKind::Role);
        assert_eq!(pool, ["X", "u1", "u2"]);
        let mut r = rng::stream(2, "role");
        for _ in 0..50 {
            let out = c.corrupt(
                &Triple::new("u1", "r", "X"),
                &CorruptionConfig::default(),
                &mut r,
            );
            if let Ok(o) = out {
                if o.side == Side::Head {
                    assert!(["X", "u2"].contains(&o.triple.head.as_str()));
                }
            }
        }
    }

    #[test]
    fn exhausted_attempts_fail() {
        // Only possible replacement for the tail yields a positive.
        let store = kb("A\tr\tX\nA\tr\tY\n", "", "");
        let c = Corrupter::new(&store, None);
        let mut r = rng::stream(3, "exhaust");
        let mut failures = 0;
        for _ in 0..20 {
            if c.corrupt(
                &Triple::new("A", "r", "X"),
                &CorruptionConfig::default(),
                &mut r,
            )
            .is_err()
            {
                failures += 1;
            }
        }
        assert_eq!(failures, 20);
    }
}
