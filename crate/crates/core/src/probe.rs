//! Linear probes: multinomial logistic regression and Huber regression,
//! trained by full-batch gradient descent with backtracking.
//!
//! The model and objective live in raw feature space. Descent runs in
//! centered, per-feature scaled coordinates with the raw L2 penalty carried
//! over, which is the same objective under a fixed change of variables.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embedstore::{pair_features, EmbeddingStore};
use crate::error::{Error, Result};
use crate::metrics::{confusion, MetricSet};
use crate::taskgen::{Instance, Label, Split, TaskDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once the relative loss decrease of an accepted step falls below this.
    pub tol: f64,
    pub huber_delta: f64,
    /// Apply the penalty to standardized instead of raw weights.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-4,
            max_epochs: 500,
            tol: 1e-6,
            huber_delta: 1.0,
            standardize: false,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("probe config: {m}")));
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be finite and >= 0");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol must be >= 0");
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return bad("huber_delta must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Classifier,
    Regressor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Accepted steps.
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
    /// Objective before the first step and after every accepted step.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub kind: ModelKind,
    pub task_id: String,
    pub label_order: Vec<String>,
    /// k rows of f weights; k = 1 for a regressor.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub config: ProbeConfig,
    pub log: TrainingLog,
}

impl ProbeModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    /// Class probabilities in `label_order`.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scores(x);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in &mut s {
            *v = (*v - max).exp();
            z += *v;
        }
        s.iter_mut().for_each(|v| *v /= z);
        s
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let s = self.scores(x);
        match self.kind {
            ModelKind::Regressor => Label::Value(s[0]),
            ModelKind::Classifier => {
                // first maximum wins
                let best = (1..s.len()).fold(0, |b, i| if s[i] > s[b] { i } else { b });
                Label::Class(self.label_order[best].clone())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let model: ProbeModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        let k = model.weights.len();
        if k == 0
            || model.bias.len() != k
            || model.weights.iter().any(|r| r.len() != model.feature_dim())
        {
            return Err(Error::Invalid(format!(
                "{}: malformed weight shapes",
                path.display()
            )));
        }
        Ok(model)
    }
}

pub fn featurize(instance: &Instance, store: &EmbeddingStore) -> Result<Vec<f64>> {
    let get = |id: &String| {
        store
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.clone()))
    };
    match instance.inputs.as_slice() {
        [e] => Ok(get(e)?.to_vec()),
        [h, t] => pair_features(get(h)?, get(t)?),
        other => Err(Error::Invalid(format!(
            "instance with {} inputs",
            other.len()
        ))),
    }
}

pub fn design_matrix(instances: &[Instance], store: &EmbeddingStore) -> Result<Array2<f64>> {
    let f = match instances.first() {
        Some(i) if i.inputs.len() == 2 => 4 * store.dim(),
        _ => store.dim(),
    };
    let mut x = Array2::zeros((instances.len(), f));
    for (mut row, inst) in x.axis_iter_mut(Axis(0)).zip(instances) {
        let v = featurize(inst, store)?;
        if v.len() != f {
            return Err(Error::DimensionMismatch {
                expected: f,
                actual: v.len(),
            });
        }
        row.assign(&ArrayView1::from(&v[..]));
    }
    Ok(x)
}

// ---- objectives -------------------------------------------------------------

/// Mean softmax cross-entropy of scores `x·wᵀ + b` plus `(l2/2)·Σ p_j w_ij²`.
fn softmax_core(
    x: ArrayView2<f64>,
    y: &[usize],
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    l2: f64,
    penalty: ArrayView1<f64>,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut s = x.dot(&w.t()) + b;
    let mut loss = 0.0;
    for (mut row, &yi) in s.axis_iter_mut(Axis(0)).zip(y) {
        let max = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        loss -= (row[yi] / z).ln();
        row /= z;
        row[yi] -= 1.0;
    }
    // s now holds (softmax - onehot)
    s /= n;
    let mut gw = s.t().dot(&x);
    let gb = s.sum_axis(Axis(0));
    let mut reg = 0.0;
    for (mut gr, wr) in gw.axis_iter_mut(Axis(0)).zip(w.axis_iter(Axis(0))) {
        for ((g, &wv), &p) in gr.iter_mut().zip(wr).zip(penalty) {
            reg += p * wv * wv;
            *g += l2 * p * wv;
        }
    }
    (loss / n + 0.5 * l2 * reg, gw, gb)
}

/// Mean Huber loss of residuals `x·w + b − y` plus `(l2/2)·Σ p_j w_j²`.
/// `w` is a single row.
fn huber_core(
    x: ArrayView2<f64>,
    y: &[f64],
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    l2: f64,
    delta: f64,
    penalty: ArrayView1<f64>,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let pred = x.dot(&w.row(0)) + b[0];
    let mut loss = 0.0;
    let mut dr = Array1::zeros(pred.len());
    for i in 0..pred.len() {
        let r = pred[i] - y[i];
        if r.abs() <= delta {
            loss += 0.5 * r * r;
            dr[i] = r / n;
        } else {
            loss += delta * (r.abs() - 0.5 * delta);
            dr[i] = delta * r.signum() / n;
        }
    }
    let mut gw = x.t().dot(&dr).insert_axis(Axis(0));
    let mut reg = 0.0;
    for ((g, &wv), &p) in gw.row_mut(0).iter_mut().zip(w.row(0)).zip(penalty) {
        reg += p * wv * wv;
        *g += l2 * p * wv;
    }
    (
        loss / n + 0.5 * l2 * reg,
        gw,
        Array1::from_elem(1, dr.sum()),
    )
}

/// Cross-entropy objective with gradients w.r.t. `w` (k×f) and `b` (k).
pub fn softmax_objective(
    x: ArrayView2<f64>,
    y: &[usize],
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let ones = Array1::ones(x.ncols());
    softmax_core(x, y, w, b, l2, ones.view())
}

/// Huber objective with gradients w.r.t. `w` (f) and `b`.
pub fn huber_objective(
    x: ArrayView2<f64>,
    y: &[f64],
    w: ArrayView1<f64>,
    b: f64,
    l2: f64,
    delta: f64,
) -> (f64, Array1<f64>, f64) {
    let ones = Array1::ones(x.ncols());
    let w2 = w.insert_axis(Axis(0));
    let b1 = Array1::from_elem(1, b);
    let (l, gw, gb) = huber_core(x, y, w2, b1.view(), l2, delta, ones.view());
    (l, gw.row(0).to_owned(), gb[0])
}

// ---- optimizer ----------------------------------------------------------------

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e4;

struct Scaled {
    z: Array2<f64>,
    mean: Array1<f64>,
    scale: Array1<f64>,
    penalty: Array1<f64>,
}

fn standardize(x: &Array2<f64>, penalize_standardized: bool) -> Scaled {
    let n = x.nrows().max(1) as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let mut z = x - &mean;
    let mut scale = z.map_axis(Axis(0), |c| (c.dot(&c) / n).sqrt());
    scale.mapv_inplace(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
    z /= &scale;
    let penalty = if penalize_standardized {
        Array1::ones(scale.len())
    } else {
        scale.mapv(|s| 1.0 / (s * s))
    };
    Scaled {
        z,
        mean,
        scale,
        penalty,
    }
}

type Objective<'a> =
    dyn Fn(ArrayView2<f64>, ArrayView1<f64>) -> (f64, Array2<f64>, Array1<f64>) + 'a;

fn descend(
    obj: &Objective,
    k: usize,
    f: usize,
    cfg: &ProbeConfig,
) -> Result<(Array2<f64>, Array1<f64>, TrainingLog)> {
    let mut w = Array2::zeros((k, f));
    let mut b = Array1::zeros(k);
    let (mut loss, mut gw, mut gb) = obj(w.view(), b.view());
    if !loss.is_finite() {
        return Err(Error::Training(format!("initial loss is {loss}")));
    }
    let mut log = TrainingLog {
        losses: vec![loss],
        ..Default::default()
    };
    let mut eta = 1.0;
    while log.epochs < cfg.max_epochs {
        let g2 = gw.iter().map(|v| v * v).sum::<f64>() + gb.iter().map(|v| v * v).sum::<f64>();
        if !g2.is_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient after {} epochs",
                log.epochs
            )));
        }
        if g2 == 0.0 {
            log.converged = true;
            break;
        }
        let mut step = None;
        for _ in 0..MAX_HALVINGS {
            let w2 = &w - &(&gw * eta);
            let b2 = &b - &(&gb * eta);
            let (l2, gw2, gb2) = obj(w2.view(), b2.view());
            if l2.is_finite() && l2 <= loss - ARMIJO_C * eta * g2 {
                step = Some((w2, b2, l2, gw2, gb2));
                break;
            }
            eta *= 0.5;
        }
        let Some((w2, b2, l2, gw2, gb2)) = step else {
            // no representable decrease left
            log.converged = true;
            break;
        };
        let rel = (loss - l2) / loss.abs().max(f64::MIN_POSITIVE);
        (w, b, loss, gw, gb) = (w2, b2, l2, gw2, gb2);
        log.epochs += 1;
        log.losses.push(loss);
        eta = (eta * 2.0).min(MAX_STEP);
        if rel < cfg.tol {
            log.converged = true;
            break;
        }
    }
    log.final_loss = loss;
    Ok((w, b, log))
}

/// Maps standardized-space parameters back to raw feature space.
fn unscale(v: &Array2<f64>, c: &Array1<f64>, s: &Scaled) -> (Vec<Vec<f64>>, Vec<f64>) {
    let w = v / &s.scale;
    let b = c - &w.dot(&s.mean);
    (w.outer_iter().map(|r| r.to_vec()).collect(), b.to_vec())
}

/// Trains a classifier on a raw design matrix; `y` indexes `labels`.
pub fn fit_classifier(
    x: &Array2<f64>,
    y: &[usize],
    k: usize,
    cfg: &ProbeConfig,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, TrainingLog)> {
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::Training(format!(
            "{} rows for {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::Training(format!(
            "label index {bad} out of range for {k} classes"
        )));
    }
    let s = standardize(x, cfg.standardize);
    let obj = |w: ArrayView2<f64>, b: ArrayView1<f64>| {
        softmax_core(s.z.view(), y, w, b, cfg.l2, s.penalty.view())
    };
    let (v, c, log) = descend(&obj, k, x.ncols(), cfg)?;
    let (w, b) = unscale(&v, &c, &s);
    Ok((w, b, log))
}

pub fn fit_regressor(
    x: &Array2<f64>,
    y: &[f64],
    cfg: &ProbeConfig,
) -> Result<(Vec<f64>, f64, TrainingLog)> {
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::Training(format!(
            "{} rows for {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite regression target".into()));
    }
    let s = standardize(x, cfg.standardize);
    let obj = |w: ArrayView2<f64>, b: ArrayView1<f64>| {
        huber_core(
            s.z.view(),
            y,
            w,
            b,
            cfg.l2,
            cfg.huber_delta,
            s.penalty.view(),
        )
    };
    let (v, c, log) = descend(&obj, 1, x.ncols(), cfg)?;
    let (mut w, b) = unscale(&v, &c, &s);
    Ok((w.swap_remove(0), b[0], log))
}

fn class_indices(ds: &TaskDataset, split: &[Instance]) -> Result<Vec<usize>> {
    split
        .iter()
        .map(|inst| {
            let c = inst.label.class().ok_or_else(|| {
                Error::Invalid(format!(
                    "{}: numeric label in a classification task",
                    ds.task_id
                ))
            })?;
            ds.labels.iter().position(|l| l == c).ok_or_else(|| {
                Error::Invalid(format!("{}: label {c:?} not in label set", ds.task_id))
            })
        })
        .collect()
}

fn values(ds: &TaskDataset, split: &[Instance]) -> Result<Vec<f64>> {
    split
        .iter()
        .map(|inst| {
            inst.label.value().ok_or_else(|| {
                Error::Invalid(format!("{}: class label in a regression task", ds.task_id))
            })
        })
        .collect()
}

pub fn train_classifier(
    ds: &TaskDataset,
    store: &EmbeddingStore,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    if !ds.kind.is_classification() {
        return Err(Error::Invalid(format!(
            "{} is a {} task, not a classification task",
            ds.task_id, ds.kind
        )));
    }
    let y = class_indices(ds, &ds.train)?;
    let mut present: Vec<usize> = y.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Training(format!(
            "{}: train split has {} distinct labels",
            ds.task_id,
            present.len()
        )));
    }
    let x = design_matrix(&ds.train, store)?;
    let (weights, bias, log) = fit_classifier(&x, &y, ds.labels.len(), cfg)
        .map_err(|e| Error::Training(format!("{}: {e}", ds.task_id)))?;
    Ok(ProbeModel {
        kind: ModelKind::Classifier,
        task_id: ds.task_id.clone(),
        label_order: ds.labels.clone(),
        weights,
        bias,
        config: cfg.clone(),
        log,
    })
}

pub fn train_regressor(
    ds: &TaskDataset,
    store: &EmbeddingStore,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    if ds.kind.is_classification() {
        return Err(Error::Invalid(format!(
            "{} is a {} task, not a regression task",
            ds.task_id, ds.kind
        )));
    }
    let y = values(ds, &ds.train)?;
    let x = design_matrix(&ds.train, store)?;
    let (w, b, log) =
        fit_regressor(&x, &y, cfg).map_err(|e| Error::Training(format!("{}: {e}", ds.task_id)))?;
    Ok(ProbeModel {
        kind: ModelKind::Regressor,
        task_id: ds.task_id.clone(),
        label_order: Vec::new(),
        weights: vec![w],
        bias: vec![b],
        config: cfg.clone(),
        log,
    })
}

/// Trains whichever probe the task kind calls for.
pub fn train(ds: &TaskDataset, store: &EmbeddingStore, cfg: &ProbeConfig) -> Result<ProbeModel> {
    if ds.kind.is_classification() {
        train_classifier(ds, store, cfg)
    } else {
        train_regressor(ds, store, cfg)
    }
}

/// Test RMSE of predicting the train-label mean.
pub fn mean_baseline(ds: &TaskDataset) -> Result<f64> {
    if ds.kind.is_classification() {
        return Err(Error::Invalid(format!(
            "{}: mean baseline needs a regression task",
            ds.task_id
        )));
    }
    let train = values(ds, &ds.train)?;
    if train.is_empty() {
        return Err(Error::Invalid(format!("{}: empty train split", ds.task_id)));
    }
    let mean = train.iter().sum::<f64>() / train.len() as f64;
    let test = values(ds, &ds.test)?;
    crate::metrics::rmse(&test, &vec![mean; test.len()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task_id: String,
    pub model_task_id: String,
    /// The model was trained on a different task.
    pub cross_task: bool,
    pub split: Split,
    /// Label order of the confusion matrix; empty for regression.
    pub labels: Vec<String>,
    pub golds: Vec<Label>,
    pub predictions: Vec<Label>,
    pub metrics: MetricSet,
}

impl EvalResult {
    pub fn confusion(&self) -> Result<crate::metrics::ConfusionMatrix> {
        let g: Vec<&str> = self.golds.iter().filter_map(Label::class).collect();
        let p: Vec<&str> = self.predictions.iter().filter_map(Label::class).collect();
        confusion(&g, &p, &self.labels)
    }
}

pub fn evaluate(
    model: &ProbeModel,
    ds: &TaskDataset,
    store: &EmbeddingStore,
    split: Split,
) -> Result<EvalResult> {
    let classifier_task = ds.kind.is_classification();
    if classifier_task != (model.kind == ModelKind::Classifier) {
        return Err(Error::Invalid(format!(
            "kind mismatch: {:?} model from {} applied to {} task {}",
            model.kind, model.task_id, ds.kind, ds.task_id
        )));
    }
    let instances = ds.split(split);
    let x = design_matrix(instances, store)?;
    if x.ncols() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            actual: x.ncols(),
        });
    }
    let predictions: Vec<Label> = x
        .outer_iter()
        .map(|r| model.predict(r.as_slice().expect("row-major")))
        .collect();
    let golds: Vec<Label> = instances.iter().map(|i| i.label.clone()).collect();
    let (labels, metrics) = if classifier_task {
        let mut labels = model.label_order.clone();
        for l in &ds.labels {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        let g: Vec<&str> = golds.iter().filter_map(Label::class).collect();
        let p: Vec<&str> = predictions.iter().filter_map(Label::class).collect();
        let cm = confusion(&g, &p, &labels)?;
        (labels, MetricSet::classification(&cm)?)
    } else {
        let g = values(ds, instances)?;
        let p: Vec<f64> = predictions.iter().filter_map(Label::value).collect();
        (Vec::new(), MetricSet::regression(&g, &p)?)
    };
    Ok(EvalResult {
        task_id: ds.task_id.clone(),
        model_task_id: model.task_id.clone(),
        cross_task: model.task_id != ds.task_id,
        split,
        labels,
        golds,
        predictions,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{GenStats, TaskKind};
    use ndarray::array;
    use proptest::prelude::*;

    fn store(rows: &[(&str, &[f64])]) -> EmbeddingStore {
        EmbeddingStore::from_rows(
            rows[0].1.len(),
            rows.iter().map(|(id, v)| (id.to_string(), v.to_vec())),
        )
        .unwrap()
    }

    fn dataset(
        kind: TaskKind,
        labels: &[&str],
        train: Vec<Instance>,
        test: Vec<Instance>,
    ) -> TaskDataset {
        TaskDataset {
            task_id: "T".into(),
            kind,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            train,
            test,
            stats: GenStats::default(),
        }
    }

    fn class(id: &str, l: &str) -> Instance {
        Instance::single(id, Label::Class(l.into()))
    }

    fn value(id: &str, v: f64) -> Instance {
        Instance::single(id, Label::Value(v))
    }

    #[test]
    fn separable_two_points() {
        let st = store(&[("a", &[1.0, 0.0]), ("b", &[-1.0, 0.5])]);
        let ds = dataset(
            TaskKind::Binary,
            &["neg", "pos"],
            vec![class("a", "pos"), class("b", "neg")],
            vec![class("a", "pos"), class("b", "neg")],
        );
        let m = train_classifier(&ds, &st, &ProbeConfig::default()).unwrap();
        let r = evaluate(&m, &ds, &st, Split::Test).unwrap();
        assert_eq!(r.metrics.micro_f1, Some(100.0));
        let p = m.predict_proba(&[1.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_label_train_is_rejected() {
        let st = store(&[("a", &[1.0]), ("b", &[2.0])]);
        let ds = dataset(
            TaskKind::Binary,
            &["x", "y"],
            vec![class("a", "x"), class("b", "x")],
            vec![],
        );
        assert!(matches!(
            train_classifier(&ds, &st, &ProbeConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn constant_target_is_learned() {
        let st = store(&[("a", &[1.0, 3.0]), ("b", &[-2.0, 0.5]), ("c", &[0.3, -1.0])]);
        let tr = vec![value("a", 2.5), value("b", 2.5), value("c", 2.5)];
        let ds = dataset(TaskKind::Regression, &[], tr.clone(), tr);
        let m = train_regressor(&ds, &st, &ProbeConfig::default()).unwrap();
        let r = evaluate(&m, &ds, &st, Split::Test).unwrap();
        assert!(r.metrics.rmse.unwrap() < 1e-3);
    }

    #[test]
    fn mean_baseline_examples() {
        let ds = dataset(
            TaskKind::Regression,
            &[],
            vec![value("a", 0.0), value("b", 2.0)],
            vec![value("c", 1.0)],
        );
        assert_eq!(mean_baseline(&ds).unwrap(), 0.0);
        let ds = dataset(
            TaskKind::Regression,
            &[],
            vec![value("a", 0.0), value("b", 0.0)],
            vec![value("c", 3.0), value("d", -3.0)],
        );
        assert_eq!(mean_baseline(&ds).unwrap(), 3.0);
        let empty = dataset(TaskKind::Regression, &[], vec![], vec![value("c", 1.0)]);
        assert!(mean_baseline(&empty).is_err());
    }

    #[test]
    fn kind_mismatch_and_cross_task() {
        let st = store(&[("a", &[1.0]), ("b", &[-1.0])]);
        let cls = dataset(
            TaskKind::Binary,
            &["n", "p"],
            vec![class("a", "p"), class("b", "n")],
            vec![class("a", "p")],
        );
        let reg = dataset(
            TaskKind::Regression,
            &[],
            vec![value("a", 1.0)],
            vec![value("b", 0.0)],
        );
        let m = train_classifier(&cls, &st, &ProbeConfig::default()).unwrap();
        assert!(matches!(
            evaluate(&m, &reg, &st, Split::Test),
            Err(Error::Invalid(_))
        ));
        let mut other = cls.clone();
        other.task_id = "U".into();
        let r = evaluate(&m, &other, &st, Split::Test).unwrap();
        assert!(r.cross_task);
        assert!(!evaluate(&m, &cls, &st, Split::Test).unwrap().cross_task);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let st = store(&[("a", &[1.0]), ("b", &[-1.0])]);
        let st2 = store(&[("a", &[1.0, 0.0]), ("b", &[-1.0, 0.0])]);
        let ds = dataset(
            TaskKind::Binary,
            &["n", "p"],
            vec![class("a", "p"), class("b", "n")],
            vec![class("a", "p")],
        );
        let m = train_classifier(&ds, &st, &ProbeConfig::default()).unwrap();
        assert!(matches!(
            evaluate(&m, &ds, &st2, Split::Test),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let st = store(&[("a", &[1.0, 2.0]), ("b", &[-1.0, 0.0])]);
        let ds = dataset(
            TaskKind::Binary,
            &["n", "p"],
            vec![class("a", "p"), class("b", "n")],
            vec![],
        );
        let m = train_classifier(&ds, &st, &ProbeConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(ProbeModel::load(&path).unwrap(), m);
    }

    #[test]
    fn pair_features_have_four_blocks() {
        let st = store(&[("a", &[1.0, 2.0, 3.0]), ("b", &[0.0, 1.0, 0.0])]);
        let inst = Instance::pair("a", "a", Label::Class("x".into()));
        let v = featurize(&inst, &st).unwrap();
        assert_eq!(v.len(), 12);
        assert!(v[6..9].iter().all(|&x| x == 0.0));
        let missing = Instance::single("zz", Label::Class("x".into()));
        assert!(matches!(
            featurize(&missing, &st),
            Err(Error::MissingEmbedding(_))
        ));
    }

    fn toy_problem(seed: u64, n: usize, f: usize, k: usize) -> (Array2<f64>, Vec<usize>) {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "probe-test");
        let x = Array2::from_shape_fn((n, f), |_| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|i| i % k).collect();
        (x, y)
    }

    #[test]
    fn accepted_losses_never_increase() {
        let (x, y) = toy_problem(3, 40, 5, 3);
        let (_, _, log) = fit_classifier(&x, &y, 3, &ProbeConfig::default()).unwrap();
        assert!(log.losses.windows(2).all(|w| w[1] <= w[0]));
        let (_, _, log) = fit_regressor(
            &x,
            &y.iter().map(|&v| v as f64 * 3.0).collect::<Vec<_>>(),
            &ProbeConfig::default(),
        )
        .unwrap();
        assert!(log.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn objectives_at_zero() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let w = Array2::zeros((3, 2));
        let b = Array1::zeros(3);
        let (l, _, _) = softmax_objective(x.view(), &[0, 2], w.view(), b.view(), 0.1);
        assert!((l - 3f64.ln()).abs() < 1e-12);
        let (l, _, gb) = huber_objective(
            x.view(),
            &[0.5, 3.0],
            Array1::zeros(2).view(),
            0.0,
            0.0,
            1.0,
        );
        // 0.5·0.25 and 1·(3 − 0.5), averaged
        assert!((l - (0.125 + 2.5) / 2.0).abs() < 1e-12);
        assert!((gb - (-0.5 - 1.0) / 2.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scale_covariance(seed: u64, c in 0.1f64..10.0) {
            let (x, y) = toy_problem(seed, 24, 4, 3);
            let cfg = ProbeConfig { max_epochs: 60, ..Default::default() };
            // the penalty matches under w -> w/c only with l2 scaled up by c²
            let scaled = ProbeConfig { l2: cfg.l2 * c * c, ..cfg.clone() };
            let (w1, b1, l1) = fit_classifier(&x, &y, 3, &cfg).unwrap();
            let (w2, b2, l2) = fit_classifier(&(&x * c), &y, 3, &scaled).unwrap();
            prop_assert_eq!(l1.losses.len(), l2.losses.len());
            for (a, b) in l1.losses.iter().zip(&l2.losses) {
                prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
            }
            let m = |w: Vec<Vec<f64>>, b: Vec<f64>| ProbeModel {
                kind: ModelKind::Classifier,
                task_id: String::new(),
                label_order: vec!["0".into(), "1".into(), "2".into()],
                weights: w,
                bias: b,
                config: cfg.clone(),
                log: TrainingLog::default(),
            };
            let (m1, m2) = (m(w1, b1), m(w2, b2));
            for row in x.outer_iter() {
                let r: Vec<f64> = row.to_vec();
                let rc: Vec<f64> = r.iter().map(|v| v * c).collect();
                prop_assert_eq!(m1.predict(&r), m2.predict(&rc));
            }
        }

        #[test]
        fn label_permutation_permutes_predictions(seed: u64) {
            let (x, y) = toy_problem(seed, 30, 3, 3);
            let perm = [2usize, 0, 1];
            let yp: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
            let cfg = ProbeConfig { max_epochs: 80, ..Default::default() };
            let (w1, b1, _) = fit_classifier(&x, &y, 3, &cfg).unwrap();
            let (w2, b2, _) = fit_classifier(&x, &yp, 3, &cfg).unwrap();
            for c in 0..3 {
                for j in 0..3 {
                    prop_assert!((w1[c][j] - w2[perm[c]][j]).abs() < 1e-9);
                }
                prop_assert!((b1[c] - b2[perm[c]]).abs() < 1e-9);
            }
        }
    }
}
