//! The command-line harness: configs, output files, reports and resume.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmbandit::harness::{read_trace_csv, ExperimentSummary, FAILED_MARKER, TRACE_SCHEMA};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmbandit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "
[environment]
seed = 0
queries_per_category = 20

[training]
steps_per_iteration = 12
batch_size = 4
samples_per_query = 6
";

fn config(strategy: &str, seeds: &str) -> String {
    format!("[run]\nstrategy = \"{strategy}\"\nseeds = {seeds}\n{SMALL}")
}

#[test]
fn seed_list_gives_one_trace_per_seed_and_one_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &config("laser_linucb", "[4, 0, 2, 1, 3]"));
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("o");
    for s in 0..5 {
        assert!(o.join(format!("trace-seed{s}.csv")).is_file());
        assert!(o.join(format!("bandit-seed{s}.json")).is_file());
    }
    let summary = ExperimentSummary::read(&o).unwrap();
    let seeds: Vec<u64> = summary.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [0, 1, 2, 3, 4]);
    assert_eq!(fs::read_dir(&o).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "summary.json").count(), 1);

    // Summary totals agree with the trace columns.
    for run in &summary.runs {
        let rows = read_trace_csv(&o.join(&run.trace_file)).unwrap();
        assert_eq!(rows.len(), run.steps);
        assert_eq!(rows.iter().map(|r| r.scorer_calls).sum::<u64>(), run.scorer_calls);
        assert_eq!(run.scorer_calls, 12 * 4 * 6);
    }
    let text = fs::read_to_string(o.join("trace-seed0.csv")).unwrap();
    assert!(text.starts_with(TRACE_SCHEMA));
}

#[test]
fn reruns_are_byte_identical_and_seed_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &config("online_ensemble", "[1, 2]"));
    let c = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        assert!(cli(&["run", "--config", c, "--seed-override", "7", "--out", out], dir.path()).status.success());
    }
    for f in ["trace-seed7.csv", "summary.json", "config.resolved.toml"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    assert!(!dir.path().join("a/trace-seed1.csv").exists());
}

#[test]
fn avg_single_runs_every_scorer_and_averages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &config("avg_single", "[0]"));
    assert!(cli(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).status.success());
    let summary = ExperimentSummary::read(&dir.path().join("o")).unwrap();
    let arms: Vec<Option<usize>> = summary.runs.iter().map(|r| r.fixed_arm).collect();
    assert_eq!(arms, [Some(0), Some(1), Some(2), Some(3)]);
    let mean = summary.runs.iter().map(|r| r.mean_gold_quality).sum::<f64>() / 4.0;
    assert!((summary.mean_gold_quality - mean).abs() < 1e-15);
    for k in 0..4 {
        let rows = read_trace_csv(&dir.path().join(format!("o/trace-seed0-arm{k}.csv"))).unwrap();
        assert!(rows.iter().all(|r| r.chosen_arm == Some(k)));
    }
}

#[test]
fn config_errors_name_the_key_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config("random", "[0]").replace("batch_size", "bacth_size");
    let cfg = write_config(dir.path(), "bad.toml", &bad);
    let out = cli(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bacth_size"), "{err}");

    let unknown = write_config(dir.path(), "s.toml", &config("laser_magic", "[0]"));
    let out = cli(&["run", "--config", unknown.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("laser_magic"));
}

#[test]
fn resolved_config_is_echoed_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &config("random", "[0]"));
    assert!(cli(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).status.success());
    let echo = dir.path().join("o/config.resolved.toml");
    let original = rmbandit::harness::ExperimentConfig::from_path(&cfg).unwrap();
    assert_eq!(rmbandit::harness::ExperimentConfig::from_path(&echo).unwrap(), original);
    // The echo spells out defaults that the input left implicit.
    assert!(fs::read_to_string(&echo).unwrap().contains("pairs_per_query = 10"));
}

#[test]
fn report_compares_invocations_and_rejects_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    for s in ["laser_exp3", "score_ensemble"] {
        let cfg = write_config(dir.path(), &format!("{s}.toml"), &config(s, "[0]"));
        assert!(cli(&["run", "--config", cfg.to_str().unwrap(), "--out", s], dir.path()).status.success());
    }
    let out = cli(&["report", "laser_exp3", "score_ensemble", "--csv", "r.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    let ratio_line = table.lines().find(|l| l.starts_with("score_ensemble")).unwrap();
    assert!(ratio_line.contains("4.000"), "{table}");
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = cli(&["report", "empty"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn export_and_resume_cold_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &config("laser_linucb", "[0, 1]"));
    let c = cfg.to_str().unwrap();
    assert!(cli(&["run", "--config", c, "--out", "first"], dir.path()).status.success());
    let out = cli(&["export-state", "first", "state.json", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(dir.path().join("state.json")).unwrap(),
        fs::read(dir.path().join("first/bandit-seed1.json")).unwrap()
    );

    let b = write_config(dir.path(), "b.toml", &config("laser_linucb", "[5]").replace("seed = 0\n", "seed = 9\n"));
    let out = cli(
        &["resume", "--config", b.to_str().unwrap(), "--bandit", "state.json", "--out", "cold"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // The selector was reused without retraining.
    assert_eq!(
        rmbandit::bandit::load_bandit(&dir.path().join("cold/bandit-seed5.json")).unwrap(),
        rmbandit::bandit::load_bandit(&dir.path().join("state.json")).unwrap()
    );
    assert!(fs::read_to_string(dir.path().join("cold/config.resolved.toml")).unwrap().contains("freeze_bandit = true"));
}

#[test]
fn failed_runs_leave_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    // A state for a 3-dimensional context cannot drive an 8-dimensional run.
    let small = write_config(
        dir.path(),
        "small.toml",
        &config("laser_linucb", "[0]").replace("seed = 0\n", "seed = 0\ncontext_dim = 3\n"),
    );
    assert!(cli(&["run", "--config", small.to_str().unwrap(), "--out", "small"], dir.path()).status.success());
    let cfg = write_config(dir.path(), "c.toml", &config("laser_linucb", "[0]"));
    let out = cli(
        &["resume", "--config", cfg.to_str().unwrap(), "--bandit", "small/bandit-seed0.json", "--out", "bad"],
        dir.path(),
    );
    assert!(!out.status.success());
    let marker = fs::read_to_string(dir.path().join("bad").join(FAILED_MARKER)).unwrap();
    assert!(marker.contains("dimension"), "{marker}");
}

#[test]
fn best_of_n_mode_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let body = config("laser_exp3", "[0]").replace("seeds = [0]\n", "seeds = [0]\nmode = \"best_of_n\"\n");
    let cfg = write_config(dir.path(), "c.toml", &body);
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = ExperimentSummary::read(&dir.path().join("o")).unwrap();
    let run = &summary.runs[0];
    assert!(run.inference_scorer_calls > 0);
    assert!((0.0..=1.0).contains(&run.mean_gold_quality));
}
