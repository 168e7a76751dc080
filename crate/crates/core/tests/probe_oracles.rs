use entprobe::embedstore::{random_gaussian, synthesize, EmbeddingStore, SynthSpec};
use entprobe::kbstore::{parse_ontology, KnowledgeStore};
use entprobe::probe::{evaluate, mean_baseline, train_classifier, train_regressor, ProbeConfig};
use entprobe::taskgen::{
    GenStats, Instance, Label, Split, TaskConfig, TaskDataset, TaskGenerator, TaskKind,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn typed_kb(types: usize, per_type: usize) -> KnowledgeStore {
    let ont: String = (0..types).map(|t| format!("Type{t}\tROOT\t1\n")).collect();
    let assign: String = (0..types)
        .flat_map(|t| (0..per_type).map(move |i| format!("e{t}_{i}\tType{t}\n")))
        .collect();
    let o = parse_ontology(ont.as_bytes(), "ont", assign.as_bytes(), "assign").unwrap();
    KnowledgeStore::assemble(
        Default::default(),
        o,
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
    )
}

fn t1_macro(kb: &KnowledgeStore, store: &EmbeddingStore, per_label: usize, seed: u64) -> f64 {
    let cfg = TaskConfig {
        per_label,
        seed,
        ..Default::default()
    };
    let ds = TaskGenerator::new(kb, &cfg, None).gen_type_task(1).unwrap();
    let model = train_classifier(&ds, store, &ProbeConfig::default()).unwrap();
    evaluate(&model, &ds, store, Split::Test)
        .unwrap()
        .metrics
        .macro_f1
        .unwrap()
}

#[test]
fn planted_types_are_separable() {
    let kb = typed_kb(5, 60);
    for (sigma, floor) in [(0.0, 100.0), (0.05, 99.0)] {
        let spec = SynthSpec {
            dim: 32,
            sigma,
            popularity: false,
            seed: 7,
            ..Default::default()
        };
        let (store, _) = synthesize(&spec, &kb).unwrap();
        let f1 = t1_macro(&kb, &store, 30, 1);
        assert!(f1 >= floor, "sigma {sigma}: macro F1 {f1}");
    }
}

#[test]
fn random_embeddings_are_at_chance() {
    let kb = typed_kb(4, 100);
    let runs: Vec<f64> = (0..10)
        .map(|seed| {
            let store = random_gaussian(kb.entity_ids(), 16, 100 + seed).unwrap();
            t1_macro(&kb, &store, 50, seed)
        })
        .collect();
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    assert!(
        (mean - 25.0).abs() <= 5.0,
        "mean macro F1 {mean} over {runs:?}"
    );
}

fn regression(store: &EmbeddingStore, label: impl Fn(&[f64]) -> f64, n: usize) -> TaskDataset {
    let ids: Vec<&str> = store.ids().collect();
    let inst = |id: &str| Instance::single(id, Label::Value(label(store.get(id).unwrap())));
    TaskDataset {
        task_id: "R".into(),
        kind: TaskKind::Regression,
        labels: Vec::new(),
        train: ids[..n].iter().map(|id| inst(id)).collect(),
        test: ids[n..2 * n].iter().map(|id| inst(id)).collect(),
        stats: GenStats::default(),
    }
}

#[test]
fn exact_linear_target_is_recovered() {
    let ids: Vec<String> = (0..400).map(|i| format!("e{i:03}")).collect();
    let store = random_gaussian(ids.iter().map(String::as_str), 8, 5).unwrap();
    let ds = regression(&store, |v| 0.7 * v[3] - 0.2, 200);
    let model = train_regressor(&ds, &store, &ProbeConfig::default()).unwrap();
    let rmse = evaluate(&model, &ds, &store, Split::Test)
        .unwrap()
        .metrics
        .rmse
        .unwrap();
    assert!(rmse < 1e-3, "rmse {rmse}");
}

#[test]
fn noise_target_does_not_beat_baseline() {
    let ids: Vec<String> = (0..1000).map(|i| format!("e{i:04}")).collect();
    let store = random_gaussian(ids.iter().map(String::as_str), 16, 9).unwrap();
    let mut rng = entprobe::rng::stream(4, "noise-labels");
    let noise: Vec<f64> = (0..1000)
        .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();
    let lookup = |v: &[f64]| {
        // deterministic per-entity noise independent of the vector
        let i = store.iter().position(|(_, w)| w == v).unwrap();
        noise[i]
    };
    let ds = regression(&store, lookup, 500);
    let model = train_regressor(&ds, &store, &ProbeConfig::default()).unwrap();
    let rmse = evaluate(&model, &ds, &store, Split::Test)
        .unwrap()
        .metrics
        .rmse
        .unwrap();
    let base = mean_baseline(&ds).unwrap();
    assert!(rmse >= 0.95 * base, "probe {rmse} vs baseline {base}");
}

#[test]
fn constant_label_drifts_nowhere() {
    let ids: Vec<String> = (0..40).map(|i| format!("e{i}")).collect();
    let store = random_gaussian(ids.iter().map(String::as_str), 4, 1).unwrap();
    let c = entprobe::rng::stream(0, "c").random_range(-5.0..5.0);
    let ds = regression(&store, |_| c, 20);
    let model = train_regressor(&ds, &store, &ProbeConfig::default()).unwrap();
    let rmse = evaluate(&model, &ds, &store, Split::Test)
        .unwrap()
        .metrics
        .rmse
        .unwrap();
    assert!(rmse < 1e-3);
}
