//! Classification and regression metrics.
//!
//! Per-class F1 uses the zero-support convention: a class with no true
//! positives, false positives or false negatives scores 0 and still counts
//! towards the macro average.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Invalid(format!("confusion matrix must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    fn k(&self) -> usize {
        self.labels.len()
    }

    /// `(tp, fp, fn)` for class `c`.
    fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let pred: u64 = (0..self.k()).map(|g| self.counts[g][c]).sum();
        let gold: u64 = self.counts[c].iter().sum();
        (tp, pred - tp, gold - tp)
    }

    fn check(&self) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::Invalid("F1 needs at least 2 labels".into()));
        }
        if self.total() == 0 {
            return Err(Error::Invalid("empty confusion matrix".into()));
        }
        Ok(())
    }

    /// Per-class F1 in `[0, 100]`, in label order.
    pub fn per_class_f1(&self) -> Result<Vec<f64>> {
        self.check()?;
        Ok((0..self.k())
            .map(|c| {
                let (tp, fp, fn_) = self.class_counts(c);
                let denom = 2 * tp + fp + fn_;
                if denom == 0 {
                    0.0
                } else {
                    100.0 * (2 * tp) as f64 / denom as f64
                }
            })
            .collect())
    }

    pub fn macro_f1(&self) -> Result<f64> {
        let per = self.per_class_f1()?;
        Ok(per.iter().sum::<f64>() / per.len() as f64)
    }

    /// Pooled-count F1; equal to accuracy for single-label data.
    pub fn micro_f1(&self) -> Result<f64> {
        self.check()?;
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for c in 0..self.k() {
            let (a, b, d) = self.class_counts(c);
            tp += a;
            fp += b;
            fn_ += d;
        }
        Ok(100.0 * (2 * tp) as f64 / (2 * tp + fp + fn_) as f64)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.labels {
            write!(out, "\t{l}").unwrap();
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                write!(out, "\t{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion<S: AsRef<str>>(
    golds: &[S],
    preds: &[S],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::Invalid(format!(
            "{} golds vs {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let pos: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |l: &str| {
        pos.get(l)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("unknown label {l:?}")))
    };
    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    for (g, p) in golds.iter().zip(preds) {
        counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    cm.macro_f1()
}

pub fn micro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    cm.micro_f1()
}

pub fn rmse(golds: &[f64], preds: &[f64]) -> Result<f64> {
    if golds.len() != preds.len() {
        return Err(Error::Invalid(format!(
            "{} golds vs {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::Invalid("rmse of an empty set".into()));
    }
    let sse: f64 = golds
        .iter()
        .zip(preds)
        .map(|(g, p)| (g - p) * (g - p))
        .sum();
    Ok((sse / golds.len() as f64).sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub rmse: Option<f64>,
    pub per_class_f1: Vec<f64>,
}

impl MetricSet {
    pub fn classification(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(MetricSet {
            macro_f1: Some(cm.macro_f1()?),
            micro_f1: Some(cm.micro_f1()?),
            rmse: None,
            per_class_f1: cm.per_class_f1()?,
        })
    }

    pub fn regression(golds: &[f64], preds: &[f64]) -> Result<Self> {
        Ok(MetricSet {
            rmse: Some(rmse(golds, preds)?),
            ..Default::default()
        })
    }

    pub fn field(&self, field: MetricField) -> Option<f64> {
        match field {
            MetricField::MacroF1 => self.macro_f1,
            MetricField::MicroF1 => self.micro_f1,
            MetricField::Rmse => self.rmse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricField {
    MacroF1,
    MicroF1,
    Rmse,
}

/// Unweighted mean of `field` over sub-task results.
pub fn aggregate_subtasks(results: &[MetricSet], field: MetricField) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Invalid("no sub-task results to aggregate".into()));
    }
    let mut sum = 0.0;
    for r in results {
        sum += r
            .field(field)
            .ok_or_else(|| Error::Invalid(format!("sub-task result lacks {field:?}")))?;
    }
    Ok(sum / results.len() as f64)
}
