use std::path::{Path, PathBuf};

use entprobe_cli::cli::run_from;
use entprobe_cli::pipeline::{ProbeResults, MANIFEST, PROBE_RESULTS};

fn toy_conf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy.conf")
}

fn run(out: &Path, args: &[&str]) -> Result<String, (u8, String)> {
    let conf = toy_conf();
    let mut argv = vec![
        "entprobe",
        args[0],
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    argv.extend(&args[1..]);
    run_from(argv).map_err(|e| (e.exit_code(), e.to_string()))
}

fn report_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').map(str::to_owned).collect())
        .collect()
}

#[test]
fn stages_in_sequence_with_task_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    run(out, &["ingest"]).unwrap();
    run(out, &["synth"]).unwrap();
    run(out, &["gen-tasks", "--jobs", "2"]).unwrap();
    run(out, &["probe", "--tasks", "T-1"]).unwrap();
    run(out, &["report", "--tasks", "T-1"]).unwrap();
    let rows = report_rows(&out.join("report/report.tsv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "T-1");
    assert_eq!(rows[0][1], "multiclass");
    assert_eq!(rows[0][2], "4");

    run(out, &["probe", "--tasks", "R-I,P-R"]).unwrap();
    let res: ProbeResults =
        serde_json::from_str(&std::fs::read_to_string(out.join(PROBE_RESULTS)).unwrap()).unwrap();
    assert!(res
        .rows
        .iter()
        .all(|r| r.family == "R-I" || r.task == "P-R"));
    assert_eq!(res.rows.iter().filter(|r| r.family == "R-I").count(), 6);
    run(out, &["report", "--format", "json"]).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report/report.json")).unwrap())
            .unwrap();
    let rows = json["rows"].as_array().unwrap();
    let pr = rows.iter().find(|r| r["task"] == "P-R").unwrap();
    assert!(pr["rmse"].is_f64());
    assert!(pr["macro_f1"].is_null());
    assert_eq!(json["config"]["per_label"], "5");
}

#[test]
fn missing_artifacts_exit_2_and_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, msg) = run(tmp.path(), &["probe"]).unwrap_err();
    assert_eq!(code, 2);
    assert!(msg.contains(MANIFEST), "{msg}");
    let (code, msg) = run(tmp.path(), &["synth"]).unwrap_err();
    assert_eq!(code, 2);
    assert!(msg.contains("snapshot.json"), "{msg}");
    assert_eq!(run(tmp.path(), &["report"]).unwrap_err().0, 2);
    let (code, msg) = run(
        tmp.path(),
        &["ingest", "--set", "entities=/nowhere/entities.tsv"],
    )
    .unwrap_err();
    assert_eq!(code, 2);
    assert!(msg.contains("/nowhere/entities.tsv"), "{msg}");
}

#[test]
fn invalid_configuration_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["ingest", "--per-label", "0"],
        vec!["ingest", "--format", "xml"],
        vec!["ingest", "--set", "l2=-1"],
        vec!["ingest", "--set", "no_such_key=1"],
        vec!["ingest", "--set", "novalue"],
        vec!["ingest", "--jobs", "0"],
    ] {
        assert_eq!(run(tmp.path(), &args).unwrap_err().0, 3, "{args:?}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    run(out, &["ingest"]).unwrap();
    run(out, &["synth"]).unwrap();
    run(
        out,
        &[
            "gen-tasks",
            "--seed",
            "9",
            "--per-label",
            "6",
            "--tasks",
            "T-1",
        ],
    )
    .unwrap();
    let m = entprobe::taskgen::Manifest::load(&out.join(MANIFEST)).unwrap();
    assert_eq!(m.seed, 9);
    assert_eq!(m.tasks.len(), 1);
    assert_eq!(m.tasks[0].train, 4 * 6);
}

#[test]
fn empty_results_are_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    run(out, &["ingest"]).unwrap();
    run(out, &["synth"]).unwrap();
    run(out, &["gen-tasks", "--tasks", "T-1"]).unwrap();
    run(out, &["probe", "--tasks", "F-D"]).unwrap();
    let (code, msg) = run(out, &["report"]).unwrap_err();
    assert_eq!(code, 1);
    assert!(msg.contains("no probe results"), "{msg}");
}

#[test]
fn run_writes_linking_results_and_report_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    run(out, &["run"]).unwrap();
    let rows = report_rows(&out.join("report/report.tsv"));
    let el = rows.iter().find(|r| r[0] == "EL").unwrap();
    assert_eq!(el[1], "linking");
    assert!(out.join("el/results.json").exists());
    // aggregated families collapse without --subtasks
    assert_eq!(rows.iter().filter(|r| r[0].starts_with("W-H")).count(), 1);
    assert_eq!(rows.iter().filter(|r| r[0].starts_with("R-I")).count(), 1);
}
