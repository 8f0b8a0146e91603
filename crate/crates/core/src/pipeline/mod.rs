//! The training loop and every selection/ensemble strategy it can run.

mod best_of_n;
mod classifier;
mod ensemble;
mod pairs;
mod trace;
mod train;

pub use best_of_n::{argmax_first, best_of_n_run, BestOfNOutcome};
pub use classifier::{classifier_select, train_classifier, ClassifierConfig, LogisticClassifier};
pub use ensemble::{online_ensemble_step, scorer_fitness, OnlineEnsembleState};
pub use pairs::{
    agreement_ensemble_pairs, build_preference_pairs, ensemble_scores, score_ensemble_pairs, vote_candidate_pairs,
    VotedPair,
};
pub use trace::{StepRecord, TrainTrace};
pub use train::{classifier_labels, fresh_bandit, initial_policy, train, TrainOutcome};

pub use crate::bandit::{load_bandit, save_bandit};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bandit::HistoryScope;
use crate::error::{ensure, Error, Result};
use crate::policy::LossMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    LaserLinucb,
    LaserExp3,
    BestFixed,
    /// Each scorer trained in its own run, metrics averaged by the harness.
    AvgSingle,
    Random,
    Sequential,
    Classifier,
    ScoreEnsemble,
    AgreementEnsemble,
    OnlineEnsemble,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 10] = [
        StrategyKind::LaserLinucb,
        StrategyKind::LaserExp3,
        StrategyKind::BestFixed,
        StrategyKind::AvgSingle,
        StrategyKind::Random,
        StrategyKind::Sequential,
        StrategyKind::Classifier,
        StrategyKind::ScoreEnsemble,
        StrategyKind::AgreementEnsemble,
        StrategyKind::OnlineEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::LaserLinucb => "laser_linucb",
            StrategyKind::LaserExp3 => "laser_exp3",
            StrategyKind::BestFixed => "best_fixed",
            StrategyKind::AvgSingle => "avg_single",
            StrategyKind::Random => "random",
            StrategyKind::Sequential => "sequential",
            StrategyKind::Classifier => "classifier",
            StrategyKind::ScoreEnsemble => "score_ensemble",
            StrategyKind::AgreementEnsemble => "agreement_ensemble",
            StrategyKind::OnlineEnsemble => "online_ensemble",
        }
    }

    pub fn is_bandit(self) -> bool {
        matches!(self, StrategyKind::LaserLinucb | StrategyKind::LaserExp3)
    }

    /// Strategies that score every response with every scorer.
    pub fn scores_with_all(self) -> bool {
        matches!(
            self,
            StrategyKind::ScoreEnsemble | StrategyKind::AgreementEnsemble | StrategyKind::OnlineEnsemble
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// How a step's batch of training queries is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchGrouping {
    /// Pick a category uniformly, then queries from that category.
    #[default]
    Category,
    /// Queries uniformly from the whole training split.
    Mixed,
}

/// Hyperparameters of one training (or best-of-n) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Iterations `M`; the DPO reference is refreshed at the start of each.
    pub iterations: usize,
    /// Steps (batches) per iteration, `T`.
    pub steps_per_iteration: usize,
    pub batch_size: usize,
    /// Preference pairs sampled per query, `P`.
    pub pairs_per_query: usize,
    /// Responses sampled per query, `n`.
    pub samples_per_query: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub beta: f64,
    pub loss: LossMode,
    /// LinUCB exploration weight.
    pub alpha: f64,
    /// Exp3 exploration mix.
    pub gamma: f64,
    /// Online-ensemble learning rate.
    pub eta: f64,
    /// Standard deviation of the Gaussian initial `b_k`.
    pub bandit_init_sd: f64,
    pub history_scope: HistoryScope,
    /// Select with the bandit but never update it (cold-start reuse of a
    /// learned selector).
    pub freeze_bandit: bool,
    /// Standardize each scorer's scores per query before ensembling.
    pub z_normalize: bool,
    pub batch_grouping: BatchGrouping,
    /// Candidate pairs sampled by the agreement ensemble.
    pub agreement_candidates: usize,
    /// Pairs kept per query by the agreement ensemble.
    pub agreement_keep: usize,
    /// Scorer used by `best_fixed`; defaults to the highest mean affinity.
    pub fixed_arm: Option<usize>,
    /// Norm of the initial policy's component along the gold direction.
    pub policy_init: f64,
    pub classifier: ClassifierConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            steps_per_iteration: 2000,
            batch_size: 16,
            pairs_per_query: 10,
            samples_per_query: 30,
            temperature: 0.8,
            learning_rate: 0.05,
            beta: 0.1,
            loss: LossMode::Dpo,
            alpha: 1.0,
            gamma: 0.1,
            eta: 0.5,
            bandit_init_sd: 0.01,
            history_scope: HistoryScope::Global,
            freeze_bandit: false,
            z_normalize: false,
            batch_grouping: BatchGrouping::Category,
            agreement_candidates: 100,
            agreement_keep: 10,
            fixed_arm: None,
            policy_init: 0.5,
            classifier: ClassifierConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn total_steps(&self) -> usize {
        self.iterations * self.steps_per_iteration
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.iterations >= 1, Config, "iterations must be at least 1");
        ensure!(self.steps_per_iteration >= 1, Config, "steps_per_iteration must be at least 1");
        ensure!(self.batch_size >= 1, Config, "batch_size must be at least 1");
        ensure!(self.pairs_per_query >= 1, Config, "pairs_per_query must be at least 1");
        ensure!(self.samples_per_query >= 2, Config, "samples_per_query must be at least 2");
        ensure!(self.temperature > 0.0, Config, "temperature must be positive");
        ensure!(self.learning_rate > 0.0, Config, "learning_rate must be positive");
        ensure!(self.beta >= 0.0, Config, "beta must be non-negative");
        ensure!(self.alpha >= 0.0, Config, "alpha must be non-negative");
        ensure!((0.0..=1.0).contains(&self.gamma), Config, "gamma must lie in [0, 1]");
        ensure!(self.eta >= 0.0, Config, "eta must be non-negative");
        ensure!(self.bandit_init_sd >= 0.0, Config, "bandit_init_sd must be non-negative");
        ensure!(self.agreement_keep >= 1, Config, "agreement_keep must be at least 1");
        ensure!(
            self.agreement_candidates >= self.agreement_keep,
            Config,
            "agreement_candidates must be at least agreement_keep"
        );
        Ok(())
    }
}
