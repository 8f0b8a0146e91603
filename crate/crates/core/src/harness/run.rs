//! Multi-seed orchestration and the files each run writes.
//!
//! An experiment directory holds `config.resolved.toml`, one
//! `trace-seed<S>.csv` per run (`trace-seed<S>-arm<k>.csv` for the
//! `avg_single` sub-runs), `bandit-seed<S>.json` for bandit strategies and a
//! single `summary.json`. A failed experiment leaves a `.failed` marker with
//! the error messages next to whatever it managed to write.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunMode};
use crate::bandit::{save_bandit, BanditState};
use crate::env::{cumulative_regret, generate_environment, mean_gold_quality, utilization_report, Environment};
use crate::error::{ensure, Error, Result};
use crate::numerics::RngStream;
use crate::pipeline::{best_of_n_run, fresh_bandit, initial_policy, train, StrategyKind, TrainTrace};
use crate::scorers::ScorerPool;

/// First line of every trace CSV.
pub const TRACE_SCHEMA: &str = "# rmbandit-trace v1";
pub const SUMMARY_FORMAT: &str = "rmbandit-summary";
pub const SUMMARY_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.resolved.toml";
pub const FAILED_MARKER: &str = ".failed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    /// Scorer used by an `avg_single` sub-run.
    pub fixed_arm: Option<usize>,
    pub trace_file: String,
    pub bandit_file: Option<String>,
    pub steps: usize,
    /// Scorer invocations during training (the trace CSV's column total).
    pub scorer_calls: u64,
    /// Scorer invocations at best-of-n inference; 0 in train mode.
    pub inference_scorer_calls: u64,
    pub final_regret: f64,
    /// Train mode: expected normalized gold quality of the final policy on
    /// the test split. Best-of-n mode: normalized gold quality of the
    /// reranked test responses.
    pub mean_gold_quality: f64,
    pub mean_normalized_reward: f64,
    /// Per-category arm frequencies over the last quarter of the steps.
    pub utilization: Vec<Vec<f64>>,
    pub modal_arms: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub format: String,
    pub version: u32,
    pub strategy: StrategyKind,
    pub mode: RunMode,
    pub num_arms: usize,
    pub num_categories: usize,
    pub steps_per_run: usize,
    pub batch_size: usize,
    pub samples_per_query: usize,
    /// Sorted by seed, then sub-run arm.
    pub runs: Vec<RunSummary>,
    pub mean_final_regret: f64,
    pub mean_gold_quality: f64,
    pub mean_scorer_calls: f64,
}

impl ExperimentSummary {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        ensure!(path.is_file(), Report, "{} has no {SUMMARY_FILE}", dir.display());
        let summary: Self = serde_json::from_slice(&fs::read(&path)?)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        ensure!(
            summary.format == SUMMARY_FORMAT && summary.version == SUMMARY_VERSION,
            Report,
            "{} has schema {} v{}, expected {SUMMARY_FORMAT} v{SUMMARY_VERSION}",
            path.display(),
            summary.format,
            summary.version
        );
        Ok(summary)
    }
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: String,
    pub seed: u64,
    pub iteration: usize,
    pub step: usize,
    /// `None` for ensemble steps (written as -1).
    pub chosen_arm: Option<usize>,
    pub raw_loss: f64,
    pub normalized_reward: f64,
    pub num_pairs: usize,
    pub scorer_calls: u64,
    pub weights: Vec<f64>,
    pub diagnostics: Vec<f64>,
    pub category_counts: Vec<usize>,
}

fn trace_header(num_arms: usize, num_categories: usize) -> Vec<String> {
    let mut header: Vec<String> = [
        "run_id",
        "seed",
        "iteration",
        "step",
        "chosen_arm",
        "raw_loss",
        "normalized_reward",
        "num_pairs",
        "scorer_calls",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..num_arms).map(|k| format!("weight_{k}")));
    header.extend((0..num_arms).map(|k| format!("diag_{k}")));
    header.extend((0..num_categories).map(|c| format!("cat_{c}")));
    header
}

pub fn write_trace_csv(path: &Path, run_id: &str, seed: u64, trace: &TrainTrace) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{TRACE_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(trace_header(trace.num_arms, trace.num_categories))?;
    for r in &trace.records {
        let mut row = vec![
            run_id.to_string(),
            seed.to_string(),
            r.iteration.to_string(),
            r.step.to_string(),
            r.chosen_arm.map_or("-1".to_string(), |k| k.to_string()),
            r.raw_loss.to_string(),
            r.normalized_reward.to_string(),
            r.num_pairs.to_string(),
            r.scorer_calls.to_string(),
        ];
        row.extend(r.arm_weights.iter().map(f64::to_string));
        row.extend(r.diagnostics.iter().map(f64::to_string));
        row.extend(r.category_counts.iter().map(usize::to_string));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    record
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Report(format!("{}: bad value in column {i}", path.display())))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    ensure!(
        first == TRACE_SCHEMA,
        Report,
        "{} does not start with {TRACE_SCHEMA:?}",
        path.display()
    );
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let (k, c) = (count("weight_"), count("cat_"));
    let expected = trace_header(k, c);
    ensure!(
        header.iter().eq(expected.iter().map(String::as_str)),
        Report,
        "{} has an unexpected column layout",
        path.display()
    );
    reader
        .records()
        .map(|record| {
            let record = record?;
            let arm: i64 = field(&record, 4, path)?;
            let floats = |start: usize, n: usize| -> Result<Vec<f64>> { (start..start + n).map(|i| field(&record, i, path)).collect() };
            Ok(TraceRow {
                run_id: record[0].to_string(),
                seed: field(&record, 1, path)?,
                iteration: field(&record, 2, path)?,
                step: field(&record, 3, path)?,
                chosen_arm: usize::try_from(arm).ok(),
                raw_loss: field(&record, 5, path)?,
                normalized_reward: field(&record, 6, path)?,
                num_pairs: field(&record, 7, path)?,
                scorer_calls: field(&record, 8, path)?,
                weights: floats(9, k)?,
                diagnostics: floats(9 + k, k)?,
                category_counts: (9 + 2 * k..9 + 2 * k + c).map(|i| field(&record, i, path)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Re-reads a written trace and checks the summary's totals against it.
fn check_consistency(path: &Path, summary: &RunSummary) -> Result<()> {
    let rows = read_trace_csv(path)?;
    let calls: u64 = rows.iter().map(|r| r.scorer_calls).sum();
    let reward = rows.iter().map(|r| r.normalized_reward).sum::<f64>() / rows.len().max(1) as f64;
    ensure!(
        rows.len() == summary.steps && calls == summary.scorer_calls && reward == summary.mean_normalized_reward,
        Report,
        "{} disagrees with the run summary",
        path.display()
    );
    Ok(())
}

struct Job {
    seed: u64,
    fixed_arm: Option<usize>,
}

impl Job {
    fn run_id(&self, strategy: StrategyKind) -> String {
        match self.fixed_arm {
            Some(k) => format!("{strategy}-arm{k}-seed{}", self.seed),
            None => format!("{strategy}-seed{}", self.seed),
        }
    }

    fn trace_file(&self) -> String {
        match self.fixed_arm {
            Some(k) => format!("trace-seed{}-arm{k}.csv", self.seed),
            None => format!("trace-seed{}.csv", self.seed),
        }
    }
}

fn run_job(
    config: &ExperimentConfig,
    env: &Environment,
    pool: &ScorerPool,
    job: &Job,
    out: &Path,
    initial_bandit: Option<&BanditState>,
) -> Result<RunSummary> {
    let strategy = config.run.strategy;
    let rng = RngStream::new(job.seed, "run");
    let mut training = config.training.clone();
    let mut effective = strategy;
    if let Some(k) = job.fixed_arm {
        training.fixed_arm = Some(k);
        effective = StrategyKind::BestFixed;
    }

    let (trace, bandit, quality, inference_calls) = match config.run.mode {
        RunMode::Train => {
            let outcome = train(&training, env, pool, effective, &rng, initial_bandit.cloned())?;
            let quality = mean_gold_quality(&outcome.params, &env.test, training.temperature)?;
            (outcome.trace, outcome.bandit, quality, 0)
        }
        RunMode::BestOfN => {
            let bandit = match initial_bandit {
                Some(state) => state.clone(),
                None => fresh_bandit(
                    strategy,
                    &training,
                    pool,
                    env.config.context_dim,
                    &mut rng.derive("bandit-init"),
                )?,
            };
            let policy = initial_policy(env, training.policy_init, &mut rng.derive("policy-init"));
            let outcome = best_of_n_run(&training, env, pool, bandit, &policy, &rng)?;
            (
                outcome.trace,
                Some(outcome.bandit),
                outcome.mean_gold_quality,
                outcome.inference_scorer_calls,
            )
        }
    };

    let run_id = job.run_id(strategy);
    let trace_file = job.trace_file();
    let trace_path = out.join(&trace_file);
    write_trace_csv(&trace_path, &run_id, job.seed, &trace)?;
    let bandit_file = match &bandit {
        Some(state) => {
            let name = format!("bandit-seed{}.json", job.seed);
            save_bandit(state, &out.join(&name))?;
            Some(name)
        }
        None => None,
    };

    let regret = cumulative_regret(&trace, env, pool)?;
    let utilization = utilization_report(&trace, Some(trace.len().div_ceil(4)));
    let rewards: f64 = trace.records.iter().map(|r| r.normalized_reward).sum();
    let summary = RunSummary {
        run_id,
        seed: job.seed,
        fixed_arm: job.fixed_arm,
        trace_file,
        bandit_file,
        steps: trace.len(),
        scorer_calls: trace.total_scorer_calls(),
        inference_scorer_calls: inference_calls,
        final_regret: regret.last().copied().unwrap_or(0.0),
        mean_gold_quality: quality,
        mean_normalized_reward: rewards / trace.len().max(1) as f64,
        modal_arms: utilization.modal_arms(),
        utilization: utilization.frequencies,
    };
    check_consistency(&trace_path, &summary)?;
    Ok(summary)
}

fn mean_of(runs: &[RunSummary], f: impl Fn(&RunSummary) -> f64) -> f64 {
    runs.iter().map(f).sum::<f64>() / runs.len() as f64
}

/// Runs every seed of `config` (concurrently) and writes all outputs to
/// `out`. `initial_bandit` cold-starts each bandit run from a saved state.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    initial_bandit: Option<&BanditState>,
) -> Result<ExperimentSummary> {
    config.validate()?;
    ensure!(
        initial_bandit.is_none() || config.run.strategy.is_bandit(),
        Config,
        "only laser_* strategies can resume from a bandit state"
    );
    fs::create_dir_all(out)?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let result = execute(config, out, initial_bandit);
    if let Err(e) = &result {
        fs::write(&marker, format!("{e}\n"))?;
    }
    result
}

fn execute(config: &ExperimentConfig, out: &Path, initial_bandit: Option<&BanditState>) -> Result<ExperimentSummary> {
    fs::write(out.join(CONFIG_ECHO_FILE), config.to_toml()?)?;
    let env = generate_environment(&config.environment)?;
    if config.run.save_dataset {
        env.save(&out.join("dataset.json"))?;
    }
    let pool = config.pool.build()?;
    let strategy = config.run.strategy;

    let mut jobs = Vec::new();
    for &seed in &config.run.seeds {
        if strategy == StrategyKind::AvgSingle {
            jobs.extend((0..pool.len()).map(|k| Job {
                seed,
                fixed_arm: Some(k),
            }));
        } else {
            jobs.push(Job { seed, fixed_arm: None });
        }
    }
    jobs.sort_by_key(|j| (j.seed, j.fixed_arm));

    let results: Vec<Result<RunSummary>> = jobs
        .par_iter()
        .map(|job| run_job(config, &env, &pool, job, out, initial_bandit))
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(summary) => runs.push(summary),
            Err(e) => failures.push(format!("{}: {e}", job.run_id(strategy))),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Report(failures.join("\n")));
    }

    let summary = ExperimentSummary {
        format: SUMMARY_FORMAT.to_string(),
        version: SUMMARY_VERSION,
        strategy,
        mode: config.run.mode,
        num_arms: pool.len(),
        num_categories: env.num_categories(),
        steps_per_run: config.training.total_steps(),
        batch_size: config.training.batch_size,
        samples_per_query: config.training.samples_per_query,
        mean_final_regret: mean_of(&runs, |r| r.final_regret),
        mean_gold_quality: mean_of(&runs, |r| r.mean_gold_quality),
        mean_scorer_calls: mean_of(&runs, |r| r.scorer_calls as f64),
        runs,
    };
    let tmp = out.join(format!("{SUMMARY_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::rename(&tmp, out.join(SUMMARY_FILE))?;
    Ok(summary)
}

/// Copies the bandit state of one run in `run_dir` to `dest`, validating it
/// on the way. Without `seed`, takes the lowest-seeded run.
pub fn export_state(run_dir: &Path, dest: &Path, seed: Option<u64>) -> Result<PathBuf> {
    let summary = ExperimentSummary::read(run_dir)?;
    let run = summary
        .runs
        .iter()
        .filter(|r| r.bandit_file.is_some())
        .find(|r| seed.is_none_or(|s| r.seed == s))
        .ok_or_else(|| Error::Report(format!("{} has no matching bandit state", run_dir.display())))?;
    let source = run_dir.join(run.bandit_file.as_ref().expect("filtered"));
    let state = crate::bandit::load_bandit(&source)?;
    save_bandit(&state, dest)?;
    Ok(source)
}
