//! Per-entity embedding tables in word2vec-style text format, pair
//! features, and synthetic tables with planted signals.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbstore::KnowledgeStore;
use crate::{rng, textio};

/// Immutable `entity-id -> vector` table, all vectors of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingStore {
    /// Builds a store from rows, keeping their order.
    pub fn from_rows(
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be > 0".into()));
        }
        let mut store = EmbeddingStore {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "non-finite component in vector for {id}"
                )));
            }
            store.push(id, &v)?;
        }
        Ok(store)
    }

    fn push(&mut self, id: String, v: &[f64]) -> Result<()> {
        if self.index.contains_key(&id) {
            return Err(Error::Invalid(format!("duplicate id {id}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `None` when the entity has no vector.
    pub fn get(&self, id: &str) -> Option<&[f64]> {
        let i = *self.index.get(id)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(id, v)| (id.as_str(), v))
    }

    /// Serializes in the same text format [`parse_embeddings`] reads. Floats
    /// are printed with the shortest decimal that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 12);
        writeln!(out, "{} {}", self.len(), self.dim).unwrap();
        for (id, v) in self.iter() {
            out.push_str(id);
            for x in v {
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a `N d` header followed by `N` rows of `id f1 .. fd`.
pub fn parse_embeddings<R: BufRead>(reader: R, source_name: &str) -> Result<EmbeddingStore> {
    let mut lines = textio::numbered_lines(reader, source_name);
    let (hn, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source_name, 1, "missing `N d` header"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [n, d] = parts[..] else {
        return Err(Error::parse(source_name, hn, "header must be `N d`"));
    };
    let (n, dim): (usize, usize) = match (n.parse(), d.parse()) {
        (Ok(n), Ok(d)) if d > 0 => (n, d),
        _ => {
            return Err(Error::parse(
                source_name,
                hn,
                format!("bad header {header:?}"),
            ))
        }
    };
    let mut store = EmbeddingStore {
        dim,
        ids: Vec::with_capacity(n),
        index: HashMap::with_capacity(n),
        data: Vec::with_capacity(n * dim),
    };
    let mut row = Vec::with_capacity(dim);
    for line in lines {
        let (ln, line) = line?;
        if store.len() == n {
            return Err(Error::parse(
                source_name,
                ln,
                format!("more rows than the {n} declared"),
            ));
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().unwrap_or_default();
        row.clear();
        for f in fields {
            match f.parse::<f64>() {
                Ok(x) if x.is_finite() => row.push(x),
                _ => {
                    return Err(Error::parse(
                        source_name,
                        ln,
                        format!("bad component {f:?}"),
                    ))
                }
            }
        }
        if row.len() != dim {
            return Err(Error::parse(
                source_name,
                ln,
                format!("expected {dim} components, found {}", row.len()),
            ));
        }
        store
            .push(id.to_owned(), &row)
            .map_err(|e| Error::parse(source_name, ln, e.to_string()))?;
    }
    if store.len() != n {
        return Err(Error::parse(
            source_name,
            hn,
            format!("header declares {n} rows, file has {}", store.len()),
        ));
    }
    Ok(store)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    parse_embeddings(textio::open(path)?, &path.display().to_string())
}

pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<()> {
    textio::write_atomic(path, store.to_text().as_bytes())
}

/// `[h ; t ; h - t ; h * t]`.
pub fn pair_features(h: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    if h.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            actual: t.len(),
        });
    }
    let mut out = Vec::with_capacity(4 * h.len());
    out.extend_from_slice(h);
    out.extend_from_slice(t);
    out.extend(h.iter().zip(t).map(|(a, b)| a - b));
    out.extend(h.iter().zip(t).map(|(a, b)| a * b));
    Ok(out)
}

/// Layout of a synthetic table. Planted channels occupy the leading dims in
/// this order: one one-hot block per entry of `type_levels`, the popularity
/// dim, then the relation block. Remaining dims carry `N(0, filler_std)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    /// Noise added to every planted dim.
    pub sigma: f64,
    pub type_levels: Vec<u8>,
    pub popularity: bool,
    /// Relations whose triples get a fixed tail-minus-head offset.
    pub relations: Vec<String>,
    pub relation_block: usize,
    pub filler_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dim: 32,
            sigma: 0.0,
            type_levels: vec![1],
            popularity: true,
            relations: Vec::new(),
            relation_block: 0,
            filler_std: 0.0,
            seed: 0,
        }
    }
}

/// Where each planted channel lives inside a synthetic vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthLayout {
    /// `(level, first dim, type ids in one-hot order)`.
    pub type_blocks: Vec<(u8, usize, Vec<String>)>,
    pub popularity_dim: Option<usize>,
    pub relation_dims: std::ops::Range<usize>,
    pub planted_relations: usize,
}

pub fn synthesize(spec: &SynthSpec, kb: &KnowledgeStore) -> Result<(EmbeddingStore, SynthLayout)> {
    if !(spec.sigma >= 0.0 && spec.filler_std >= 0.0) {
        return Err(Error::Invalid("noise levels must be >= 0".into()));
    }
    let mut next = 0usize;
    let mut type_blocks = Vec::new();
    for &level in &spec.type_levels {
        let types: Vec<String> = kb
            .ontology
            .types_at_level(level)
            .into_iter()
            .map(str::to_owned)
            .collect();
        let width = types.len();
        type_blocks.push((level, next, types));
        next += width;
    }
    let popularity_dim = spec.popularity.then(|| {
        next += 1;
        next - 1
    });
    let relation_dims = next..next + spec.relation_block;
    next += spec.relation_block;
    if next > spec.dim {
        return Err(Error::Invalid(format!(
            "{next} planted channels do not fit in dim {}",
            spec.dim
        )));
    }

    let ids: Vec<&str> = kb.entity_ids().collect();
    let row_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let dim = spec.dim;
    let mut data = vec![0.0; ids.len() * dim];

    for (level, start, types) in &type_blocks {
        let pos: HashMap<&str, usize> = types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        for (i, e) in ids.iter().enumerate() {
            if let Some(t) = kb.ontology.type_at_level(e, *level) {
                data[i * dim + start + pos[t]] = 1.0;
            }
        }
    }
    if let Some(pd) = popularity_dim {
        for (i, e) in ids.iter().enumerate() {
            data[i * dim + pd] = (1.0 + kb.popularity.count(e) as f64).ln();
        }
    }

    let mut planted_relations = 0;
    if !relation_dims.is_empty() {
        let width = relation_dims.len();
        let mut base_rng = rng::stream(spec.seed, "synth/relation-base");
        for i in 0..ids.len() {
            for j in relation_dims.clone() {
                data[i * dim + j] = base_rng.sample(StandardNormal);
            }
        }
        let mut offset_rng = rng::stream(spec.seed, "synth/relation-offsets");
        let mut relations = spec.relations.clone();
        relations.sort();
        relations.dedup();
        let offsets: BTreeMap<&str, Vec<f64>> = relations
            .iter()
            .map(|r| {
                let o = (0..width)
                    .map(|_| offset_rng.sample(StandardNormal))
                    .collect();
                (r.as_str(), o)
            })
            .collect();
        let mut planted = vec![false; ids.len()];
        for t in kb.triples.iter() {
            let Some(offset) = offsets.get(t.relation.as_str()) else {
                continue;
            };
            let (hi, ti) = (row_of[t.head.as_str()], row_of[t.tail.as_str()]);
            if hi == ti || planted[ti] {
                continue;
            }
            for (k, j) in relation_dims.clone().enumerate() {
                data[ti * dim + j] = data[hi * dim + j] + offset[k];
            }
            planted[ti] = true;
            planted_relations += 1;
        }
    }

    if spec.sigma > 0.0 {
        let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut r = rng::stream(spec.seed, "synth/noise");
        for i in 0..ids.len() {
            for j in 0..next {
                data[i * dim + j] += noise.sample(&mut r);
            }
        }
    }
    if spec.filler_std > 0.0 && next < dim {
        let filler =
            Normal::new(0.0, spec.filler_std).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut r = rng::stream(spec.seed, "synth/filler");
        for i in 0..ids.len() {
            for j in next..dim {
                data[i * dim + j] = filler.sample(&mut r);
            }
        }
    }

    let rows = ids
        .iter()
        .enumerate()
        .map(|(i, e)| ((*e).to_owned(), data[i * dim..(i + 1) * dim].to_vec()));
    let store = EmbeddingStore::from_rows(dim, rows)?;
    Ok((
        store,
        SynthLayout {
            type_blocks,
            popularity_dim,
            relation_dims,
            planted_relations,
        },
    ))
}

/// Independent `N(0, 1)` vectors for every entity id, in the given order.
pub fn random_gaussian<'a>(
    ids: impl IntoIterator<Item = &'a str>,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingStore> {
    let mut r = rng::stream(seed, "synth/gaussian");
    let rows: Vec<(String, Vec<f64>)> = ids
        .into_iter()
        .map(|id| {
            (
                id.to_owned(),
                (0..dim).map(|_| r.sample(StandardNormal)).collect(),
            )
        })
        .collect();
    EmbeddingStore::from_rows(dim, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbstore::{parse_ontology, parse_popularity, parse_triples, KnowledgeStore};
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<EmbeddingStore> {
        parse_embeddings(s.as_bytes(), "emb")
    }

    #[test]
    fn loads_header_and_rows() {
        let s = parse("2 3\nA 1 2 3\nB 0.5 -1e-3 4\n").unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.len(), 2);
        assert_eq!(s.get("B").unwrap(), [0.5, -1e-3, 4.0]);
    }

    #[test]
    fn short_row_errors_at_its_line() {
        match parse("2 3\nA 1 2 3\nB 1 2\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn absent_lookup_is_none() {
        let s = parse("1 3\nA 0 0 0\n").unwrap();
        assert_eq!(s.get("A").unwrap(), [0.0; 3]);
        assert!(s.get("B").is_none());
    }

    #[test]
    fn duplicate_and_count_mismatch_rejected() {
        assert!(parse("2 1\nA 1\nA 2\n").is_err());
        assert!(parse("3 1\nA 1\nB 2\n").is_err());
        assert!(parse("1 1\nA 1\nB 2\n").is_err());
        assert!(parse("1 1\nA nan\n").is_err());
    }

    #[test]
    fn pair_feature_blocks() {
        assert_eq!(
            pair_features(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            [1., 2., 1., 2., 0., 0., 1., 4.]
        );
        assert_eq!(
            pair_features(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            [1., 0., 0., 1., 1., -1., 0., 0.]
        );
        assert!(pair_features(&[1.0, 0.0], &[0.0, 1.0, 2.0]).is_err());
    }

    fn typed_kb() -> KnowledgeStore {
        let ontology = parse_ontology(
            "A\tROOT\t1\nB\tROOT\t1\nC\tROOT\t1\n".as_bytes(),
            "o",
            "e1\tA\ne2\tB\ne3\tC\n".as_bytes(),
            "a",
        )
        .unwrap();
        let popularity = parse_popularity("e1\t0\ne2\t10\n".as_bytes(), "p").unwrap();
        let (triples, stats) = parse_triples("e1\tr\te2\n".as_bytes(), "t").unwrap();
        KnowledgeStore::assemble(
            Default::default(),
            ontology,
            triples,
            stats,
            Default::default(),
            popularity,
            Default::default(),
        )
    }

    #[test]
    fn synthetic_type_block_is_exact_one_hot() {
        let kb = typed_kb();
        let spec = SynthSpec {
            dim: 8,
            ..Default::default()
        };
        let (store, layout) = synthesize(&spec, &kb).unwrap();
        assert_eq!(&store.get("e2").unwrap()[..3], [0.0, 1.0, 0.0]);
        assert_eq!(
            store.get("e1").unwrap()[layout.popularity_dim.unwrap()],
            0.0
        );
        assert_eq!(store.get("e2").unwrap()[3], (11.0f64).ln());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let kb = typed_kb();
        let spec = SynthSpec {
            dim: 10,
            sigma: 0.3,
            relations: vec!["r".into()],
            relation_block: 3,
            filler_std: 1.0,
            seed: 11,
            ..Default::default()
        };
        let (a, la) = synthesize(&spec, &kb).unwrap();
        let (b, _) = synthesize(&spec, &kb).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(la.planted_relations, 1);
    }

    #[test]
    fn relation_offset_is_recoverable() {
        let kb = typed_kb();
        let spec = SynthSpec {
            dim: 10,
            relations: vec!["r".into()],
            relation_block: 3,
            seed: 3,
            ..Default::default()
        };
        let (a, layout) = synthesize(&spec, &kb).unwrap();
        let other = synthesize(
            &SynthSpec {
                relations: vec![],
                ..spec.clone()
            },
            &kb,
        )
        .unwrap()
        .0;
        let dims = layout.relation_dims.clone();
        // Tail block = head block + offset; the head block is unchanged.
        assert_eq!(
            &a.get("e1").unwrap()[dims.clone()],
            &other.get("e1").unwrap()[dims.clone()]
        );
        assert_ne!(
            &a.get("e2").unwrap()[dims.clone()],
            &other.get("e2").unwrap()[dims]
        );
    }

    #[test]
    fn too_many_channels_rejected() {
        let kb = typed_kb();
        let spec = SynthSpec {
            dim: 3,
            ..Default::default()
        };
        assert!(synthesize(&spec, &kb).is_err());
    }

    proptest! {
        #[test]
        fn self_pair_has_zero_difference_block(h in prop::collection::vec(-1e6f64..1e6, 1..16)) {
            let f = pair_features(&h, &h).unwrap();
            let d = h.len();
            prop_assert!(f[2 * d..3 * d].iter().all(|x| *x == 0.0));
        }

        #[test]
        fn text_round_trip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 1..8)
        ) {
            let store = EmbeddingStore::from_rows(3, rows.iter().enumerate().map(|(i, v)| (format!("e{i}"), v.clone()))).unwrap();
            let text = store.to_text();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.to_text(), text);
            for (i, v) in rows.iter().enumerate() {
                let got = back.get(&format!("e{i}")).unwrap();
                prop_assert!(got.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}
