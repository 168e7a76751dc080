//! Balanced "which side is larger" pair sampling shared by the popularity
//! comparison and factual comparison tasks.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{generation_error, Instance, Label};
use crate::error::Result;

pub const FIRST_LARGER: &str = "first";
pub const SECOND_LARGER: &str = "second";

/// `(a, b)` is comparable at `ratio` when the larger value is at least
/// `ratio` times the smaller. Ties never qualify.
pub fn ratio_eligible(a: f64, b: f64, ratio: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    hi > lo && hi >= ratio * lo
}

pub(crate) struct Candidate {
    pub id: String,
    pub value: f64,
    /// Pairs are only formed within a group.
    pub group: String,
}

struct Group {
    /// Sorted by value.
    members: Vec<(f64, String)>,
}

impl Group {
    /// Index ranges `[0, lo)` and `[hi, n)` of partners for member `i`.
    fn partner_ranges(&self, v: f64, ratio: f64) -> (usize, usize) {
        let m = &self.members;
        let lo = m.partition_point(|(x, _)| ratio_eligible(*x, v, ratio) && *x < v);
        let hi = m.partition_point(|(x, _)| !(ratio_eligible(*x, v, ratio) && *x > v));
        (lo, hi)
    }
}

/// Draws `2 * per_label` distinct unordered pairs per split, alternately
/// oriented so each split holds `per_label` of each label.
pub(crate) fn sample_compare_pairs(
    task_id: &str,
    items: Vec<Candidate>,
    ratio: f64,
    per_label: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<Instance>, Vec<Instance>)> {
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for c in items {
        groups
            .entry(c.group)
            .or_insert_with(|| Group {
                members: Vec::new(),
            })
            .members
            .push((c.value, c.id));
    }
    let mut anchors = Vec::new();
    for (g, group) in groups.iter_mut() {
        group
            .members
            .sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (i, (v, _)) in group.members.iter().enumerate() {
            let (lo, hi) = group.partner_ranges(*v, ratio);
            if lo + (group.members.len() - hi) > 0 {
                anchors.push((g.clone(), i, lo, hi));
            }
        }
    }
    let need = 4 * per_label;
    if anchors.is_empty() && need > 0 {
        return Err(generation_error(task_id, "no eligible pairs"));
    }
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut pairs = Vec::with_capacity(need);
    let budget = need * 50 + 1000;
    for _ in 0..budget {
        if pairs.len() == need {
            break;
        }
        let (g, i, lo, hi) = &anchors[rng.random_range(0..anchors.len())];
        let members = &groups[g].members;
        let n_partners = lo + (members.len() - hi);
        let k = rng.random_range(0..n_partners);
        let j = if k < *lo { k } else { hi + (k - lo) };
        let (a, b) = (&members[*i], &members[j]);
        let key = if a.1 < b.1 {
            (a.1.clone(), b.1.clone())
        } else {
            (b.1.clone(), a.1.clone())
        };
        if seen.insert(key) {
            // larger-first when the pair index is even
            let (big, small) = if a.0 > b.0 { (a, b) } else { (b, a) };
            let inst = if pairs.len() % 2 == 0 {
                Instance::pair(&big.1, &small.1, Label::Class(FIRST_LARGER.into()))
            } else {
                Instance::pair(&small.1, &big.1, Label::Class(SECOND_LARGER.into()))
            };
            pairs.push(inst);
        }
    }
    if pairs.len() < need {
        return Err(generation_error(
            task_id,
            format!("found {} distinct eligible pairs, need {need}", pairs.len()),
        ));
    }
    let mut test = pairs.split_off(2 * per_label);
    pairs.shuffle(rng);
    test.shuffle(rng);
    Ok((pairs, test))
}
