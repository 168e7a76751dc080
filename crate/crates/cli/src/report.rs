use std::fmt::Write as _;

use entprobe::metrics::{aggregate_subtasks, MetricField, MetricSet};
use entprobe::taskgen::FAMILIES;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::pipeline::{ElReport, ProbeResults, TaskResult};

/// Families reported as the mean over their subtasks.
pub const AGGREGATED: [&str; 3] = ["W-H", "W-M", "R-I"];

pub const COLUMNS: [&str; 7] = [
    "taskId", "kind", "nLabels", "macroF1", "microF1", "rmse", "notes",
];

const CONVENTIONS: [&str; 4] = [
    "F1 values are percentages with 1 decimal; rmse has 2 decimals; '-' marks a metric that does not apply",
    "zero-support classes (no gold and no predicted instances) score F1 = 0 and count toward macro F1",
    "W-H, W-M and R-I rows are unweighted means over their subtasks",
    "metrics are computed on the test split",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub task: String,
    pub kind: String,
    pub n_labels: Option<usize>,
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub rmse: Option<f64>,
    pub notes: String,
}

fn task_row(r: &TaskResult) -> ReportRow {
    let mut notes = format!("train={} test={}", r.train, r.test);
    if r.dropped > 0 {
        let _ = write!(notes, "; dropped={}", r.dropped);
    }
    if let Some(b) = r.baseline_rmse {
        let _ = write!(notes, "; mean-baseline rmse={b:.2}");
    }
    if !r.converged {
        let _ = write!(notes, "; not converged after {} epochs", r.epochs);
    }
    ReportRow {
        task: r.task.clone(),
        kind: r.kind.to_string(),
        n_labels: (r.n_labels > 0).then_some(r.n_labels),
        macro_f1: r.metrics.macro_f1,
        micro_f1: r.metrics.micro_f1,
        rmse: r.metrics.rmse,
        notes,
    }
}

fn failure_row(task: &str, notes: String) -> ReportRow {
    ReportRow {
        task: task.to_owned(),
        kind: "-".into(),
        n_labels: None,
        macro_f1: None,
        micro_f1: None,
        rmse: None,
        notes,
    }
}

pub fn build_rows(results: &ProbeResults, el: Option<&ElReport>, subtasks: bool) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for fam in FAMILIES {
        let members: Vec<&TaskResult> = results.rows.iter().filter(|r| r.family == fam).collect();
        if AGGREGATED.contains(&fam) && !members.is_empty() {
            let sets: Vec<MetricSet> = members.iter().map(|r| r.metrics.clone()).collect();
            rows.push(ReportRow {
                task: fam.to_owned(),
                kind: members[0].kind.to_string(),
                n_labels: Some(members[0].n_labels),
                macro_f1: aggregate_subtasks(&sets, MetricField::MacroF1).ok(),
                micro_f1: aggregate_subtasks(&sets, MetricField::MicroF1).ok(),
                rmse: None,
                notes: format!("mean over {} subtasks", members.len()),
            });
            if subtasks {
                rows.extend(members.iter().map(|r| task_row(r)));
            }
        } else {
            rows.extend(members.iter().map(|r| task_row(r)));
        }
        for f in results
            .generation_failures
            .iter()
            .filter(|f| entprobe::taskgen::family_of(&f.task) == fam)
        {
            rows.push(failure_row(&f.task, format!("not generated: {}", f.reason)));
        }
        for f in results
            .failures
            .iter()
            .filter(|f| entprobe::taskgen::family_of(&f.task) == fam)
        {
            rows.push(failure_row(&f.task, format!("probe failed: {}", f.reason)));
        }
    }
    if let Some(el) = el {
        rows.push(ReportRow {
            task: "EL".into(),
            kind: "linking".into(),
            n_labels: None,
            macro_f1: Some(el.test.macro_p_at_1),
            micro_f1: Some(el.test.micro_p_at_1),
            rmse: None,
            notes: format!(
                "P@1 over {} mentions; popularity-only micro={:.1} macro={:.1}",
                el.test.n_mentions, el.popularity_baseline[0], el.popularity_baseline[1]
            ),
        });
    }
    rows
}

pub fn fmt_f1(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

pub fn fmt_rmse(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

pub fn to_tsv(cfg: &RunConfig, rows: &[ReportRow]) -> String {
    let mut s = String::from("# entprobe probing report\n");
    for (k, v) in cfg.echo() {
        let _ = writeln!(s, "# {k} = {v}");
    }
    for c in CONVENTIONS {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str(&COLUMNS.join("\t"));
    s.push('\n');
    for r in rows {
        let cells = [
            r.task.clone(),
            r.kind.clone(),
            r.n_labels.map_or_else(|| "-".into(), |n| n.to_string()),
            fmt_f1(r.macro_f1),
            fmt_f1(r.micro_f1),
            fmt_rmse(r.rmse),
            r.notes.replace(['\t', '\n'], " "),
        ];
        s.push_str(&cells.join("\t"));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: std::collections::BTreeMap<&'static str, String>,
    conventions: &'a [&'a str],
    rows: &'a [ReportRow],
}

pub fn to_json(cfg: &RunConfig, rows: &[ReportRow]) -> CliResult<String> {
    let report = JsonReport {
        config: cfg.echo().into_iter().collect(),
        conventions: &CONVENTIONS,
        rows,
    };
    let mut s = serde_json::to_string_pretty(&report).map_err(entprobe::Error::from)?;
    s.push('\n');
    Ok(s)
}
