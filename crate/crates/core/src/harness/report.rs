//! Comparison tables over finished experiment directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunMode;
use super::run::ExperimentSummary;
use crate::error::{ensure, Result};
use crate::pipeline::StrategyKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dir: String,
    pub strategy: StrategyKind,
    pub mode: RunMode,
    pub runs: usize,
    pub mean_final_regret: f64,
    pub mean_gold_quality: f64,
    /// Mean training-time scorer invocations per run.
    pub scorer_calls_per_run: f64,
    pub scorer_calls_per_step: f64,
    /// Calls per step relative to the cheapest row of the report.
    pub invocation_ratio: f64,
    /// Per-category modal arm of the run-averaged utilization, `-` when unseen.
    pub modal_arms: String,
}

/// Training-time scorer invocations of `a` relative to `b`, for two
/// experiments with matched step counts, batch sizes and sample counts.
pub fn invocation_ratio(a: &ExperimentSummary, b: &ExperimentSummary) -> Result<f64> {
    ensure!(
        (a.steps_per_run, a.batch_size, a.samples_per_query) == (b.steps_per_run, b.batch_size, b.samples_per_query),
        Report,
        "invocation counts are only comparable for matched step, batch and sample settings"
    );
    Ok(a.mean_scorer_calls / b.mean_scorer_calls)
}

fn modal_arms(summary: &ExperimentSummary) -> String {
    (0..summary.num_categories)
        .map(|c| {
            let mut mass = vec![0.0; summary.num_arms];
            for run in &summary.runs {
                for (k, f) in run.utilization[c].iter().enumerate() {
                    mass[k] += f;
                }
            }
            if mass.iter().all(|m| *m == 0.0) {
                return "-".to_string();
            }
            let mut best = 0;
            for k in 1..mass.len() {
                if mass[k] > mass[best] {
                    best = k;
                }
            }
            best.to_string()
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// One row per experiment directory, in the given order.
pub fn build_report(dirs: &[PathBuf]) -> Result<Vec<ReportRow>> {
    ensure!(!dirs.is_empty(), Report, "no run directories given");
    let summaries = dirs
        .iter()
        .map(|d| ExperimentSummary::read(d))
        .collect::<Result<Vec<_>>>()?;
    let first = &summaries[0];
    for (dir, s) in dirs.iter().zip(&summaries) {
        ensure!(
            (s.num_arms, s.num_categories) == (first.num_arms, first.num_categories),
            Report,
            "{} has {} arms over {} categories, {} has {} over {}",
            dir.display(),
            s.num_arms,
            s.num_categories,
            dirs[0].display(),
            first.num_arms,
            first.num_categories
        );
        ensure!(!s.runs.is_empty(), Report, "{} contains no runs", dir.display());
    }
    let per_step = |s: &ExperimentSummary| s.mean_scorer_calls / s.steps_per_run as f64;
    let cheapest = summaries.iter().map(per_step).fold(f64::INFINITY, f64::min);
    Ok(dirs
        .iter()
        .zip(&summaries)
        .map(|(dir, s)| ReportRow {
            dir: dir.display().to_string(),
            strategy: s.strategy,
            mode: s.mode,
            runs: s.runs.len(),
            mean_final_regret: s.mean_final_regret,
            mean_gold_quality: s.mean_gold_quality,
            scorer_calls_per_run: s.mean_scorer_calls,
            scorer_calls_per_step: per_step(s),
            invocation_ratio: per_step(s) / cheapest,
            modal_arms: modal_arms(s),
        })
        .collect())
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:<10} {:>4} {:>12} {:>10} {:>14} {:>10} {:>7}  modal arms",
        "strategy", "mode", "runs", "regret", "gold", "calls/run", "calls/step", "ratio"
    );
    for r in rows {
        let mode = match r.mode {
            RunMode::Train => "train",
            RunMode::BestOfN => "best_of_n",
        };
        let _ = writeln!(
            out,
            "{:<20} {:<10} {:>4} {:>12.3} {:>10.4} {:>14.1} {:>10.1} {:>7.3}  {}",
            r.strategy.as_str(),
            mode,
            r.runs,
            r.mean_final_regret,
            r.mean_gold_quality,
            r.scorer_calls_per_run,
            r.scorer_calls_per_step,
            r.invocation_ratio,
            r.modal_arms
        );
    }
    out
}

pub fn write_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
