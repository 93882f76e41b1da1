//! The `rrnn` binary driven end to end on a small synthetic dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[train]
learning_rate = 0.05
max_epochs = 6
patience = 3
seed = 4

[synth]
num_train = 120
num_dev = 30
num_test = 30
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(ws.path("run.toml"), CONFIG).unwrap();
        ws.ok(&["synth", "--config", "run.toml", "--out", "data"]);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_rrnn"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("RRNN_LOG")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const DATA: [&str; 4] = ["--config", "run.toml", "--data", "data"];

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    let mut args = extra[..1].to_vec();
    args.extend(DATA);
    args.extend(&extra[1..]);
    args
}

#[test]
fn pipeline_equals_chained_stages() {
    let ws = Workspace::new();
    ws.ok(&with(&["pipeline", "--lambda", "0.002", "--out", "p/model.json"]));
    ws.ok(&with(&["train", "--lambda", "0.002", "--out", "c/fit.json"]));
    ws.ok(&["prune", "--model", "c/fit.json", "--out", "c/pruned.json"]);
    ws.ok(&with(&["finetune", "--model", "c/pruned.json", "--out", "c/model.json"]));
    assert_eq!(ws.read("p/model.json"), ws.read("c/model.json"));
    assert_eq!(
        json(&ws.path("p/model.report.json"))["structure"],
        json(&ws.path("c/pruned.report.json"))["structure"]
    );
}

#[test]
fn prune_defaults_to_epsilon_point_one() {
    let ws = Workspace::new();
    ws.ok(&with(&["train", "--lambda", "0.01", "--out", "fit.json"]));
    let stdout = ws.ok(&["prune", "--model", "fit.json", "--out", "pruned.json"]);
    assert!(stdout.starts_with("epsilon=0.1 "), "{stdout}");
    assert_eq!(json(&ws.path("pruned.report.json"))["report"]["epsilon"], 0.1);
}

#[test]
fn pipeline_then_visualize() {
    let ws = Workspace::new();
    ws.ok(&with(&["pipeline", "--lambda", "0.001", "--out", "m.json"]));
    for name in ["m.json", "m.history.json", "m.report.json", "m.summary.json"] {
        assert!(ws.path(name).exists(), "{name} missing");
    }
    let table = ws.ok(&with(&["visualize", "--model", "m.json", "--top-n", "2"]));
    assert!(table.starts_with("WFSA "), "{table}");
    assert!(table.contains("top") && table.contains("bottom"));
    let tsv = ws.ok(&with(&["visualize", "--model", "m.json", "--format", "tsv", "--split", "test"]));
    assert!(tsv.starts_with("wfsa\tlist\trank\tdoc_id\tscore\tcells\n"));
}

#[test]
fn seeds_make_runs_repeatable() {
    let ws = Workspace::new();
    for out in ["a.json", "b.json"] {
        ws.ok(&with(&["pipeline", "--seed", "17", "--lambda", "0.003", "--out", out]));
    }
    ws.ok(&with(&["pipeline", "--seed", "18", "--lambda", "0.003", "--out", "c.json"]));
    assert_eq!(ws.read("a.json"), ws.read("b.json"));
    assert_ne!(ws.read("a.json"), ws.read("c.json"));
}

#[test]
fn search_terminates_within_bounds_or_reports_failure() {
    let ws = Workspace::new();
    let out = ws.run(&with(&["search", "--goal-transitions", "20", "--out", "s/model.json"]));
    let log = json(&ws.path("s/model.search.json"));
    if out.status.success() {
        let lambda = log["lambda"].as_f64().unwrap();
        assert!((1e-9..=1e2).contains(&lambda));
        let transitions = json(&ws.path("s/model.summary.json"))["transitions"].as_u64().unwrap();
        assert!(transitions.abs_diff(20) <= 10);
    } else {
        assert_eq!(out.status.code(), Some(1));
        assert_eq!(log["converged"], false);
        assert!(!log["failures"].as_array().unwrap().is_empty());
    }
}

#[test]
fn tradeoff_csv_from_summaries() {
    let ws = Workspace::new();
    ws.ok(&with(&["pipeline", "--lambda", "0.001", "--out", "a.json"]));
    ws.ok(&with(&["pipeline", "--lambda", "0.02", "--out", "b.json"]));
    let csv = ws.ok(&["tradeoff", "a.summary.json", "b.summary.json"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,transitions,transitions_std,accuracy,accuracy_std");
    assert_eq!(lines.len(), 3);
    let t: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(t[0] <= t[1]);
}

#[test]
fn usage_errors_exit_two() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ws.run(&["prune", "--model", "m.json", "--bogus"]).status.code(), Some(2));
    assert_eq!(ws.run(&[]).status.code(), Some(2));
}

#[test]
fn operational_errors_exit_one_with_one_line() {
    let ws = Workspace::new();
    for args in [
        vec!["prune", "--model", "missing.json"],
        vec!["train", "--data", "nowhere"],
        vec!["train", "--config", "bad.toml", "--data", "data"],
    ] {
        std::fs::write(ws.path("bad.toml"), "[train]\nlr = 1\n").unwrap();
        let out = ws.run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert!(stderr.starts_with("error: "), "{stderr}");
    }
}
