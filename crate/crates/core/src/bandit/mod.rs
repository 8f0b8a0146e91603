//! Arm-selection strategies over the scorer pool.
//!
//! [`LinUcb`] is contextual; [`Exp3`] ignores the context. Both sit behind
//! [`ArmSelector`], and [`BanditState`] pairs one of them with the reward
//! normalizer so a run can feed raw (negative-loss) rewards directly.

mod exp3;
mod linucb;
mod normalizer;
mod persist;

pub use exp3::{exp3_probabilities, exp3_select, exp3_update, Exp3State};
pub use linucb::{linucb_select, linucb_update, LinUcb, LinUcbArm};
pub use normalizer::{normalize_reward, HistoryScope, RewardNormalizer};
pub use persist::{load_bandit, save_bandit, STATE_FORMAT, STATE_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::RngStream;

/// Outcome of one selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmChoice {
    pub arm: usize,
    /// Probability with which `arm` was drawn (1 for deterministic selectors).
    pub probability: f64,
    /// Per-arm UCB scores (LinUCB) or selection probabilities (Exp3).
    pub diagnostics: Vec<f64>,
}

/// Common interface of the bandit selectors.
pub trait ArmSelector {
    fn num_arms(&self) -> usize;

    fn select(&mut self, context: &[f64], rng: &mut RngStream) -> Result<ArmChoice>;

    /// Feeds back a reward already normalized to `[0, 1]`.
    fn update(&mut self, choice: &ArmChoice, context: &[f64], reward: f64) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum BanditAlgorithm {
    #[serde(rename = "linucb")]
    LinUcb(LinUcb),
    Exp3(Exp3State),
}

impl BanditAlgorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            BanditAlgorithm::LinUcb(_) => "linucb",
            BanditAlgorithm::Exp3(_) => "exp3",
        }
    }

    fn selector(&mut self) -> &mut dyn ArmSelector {
        match self {
            BanditAlgorithm::LinUcb(b) => b,
            BanditAlgorithm::Exp3(b) => b,
        }
    }
}

/// A selector plus the quantile normalizer(s) that turn raw rewards into
/// `[0, 1]` feedback. This is the unit that gets persisted and reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    pub algorithm: BanditAlgorithm,
    pub history_scope: HistoryScope,
    /// One normalizer for [`HistoryScope::Global`], one per arm otherwise.
    pub normalizers: Vec<RewardNormalizer>,
}

impl BanditState {
    pub fn new(algorithm: BanditAlgorithm, history_scope: HistoryScope) -> Self {
        let count = match history_scope {
            HistoryScope::Global => 1,
            HistoryScope::PerArm => match &algorithm {
                BanditAlgorithm::LinUcb(b) => b.arms.len(),
                BanditAlgorithm::Exp3(b) => b.scores.dim(),
            },
        };
        Self {
            algorithm,
            history_scope,
            normalizers: vec![RewardNormalizer::default(); count],
        }
    }

    pub fn num_arms(&self) -> usize {
        match &self.algorithm {
            BanditAlgorithm::LinUcb(b) => b.num_arms(),
            BanditAlgorithm::Exp3(b) => b.num_arms(),
        }
    }

    /// Context dimension for LinUCB; `None` for context-free selectors.
    pub fn context_dim(&self) -> Option<usize> {
        match &self.algorithm {
            BanditAlgorithm::LinUcb(b) => b.arms.first().map(|a| a.b.dim()),
            BanditAlgorithm::Exp3(_) => None,
        }
    }

    pub fn select(&mut self, context: &[f64], rng: &mut RngStream) -> Result<ArmChoice> {
        self.algorithm.selector().select(context, rng)
    }

    fn normalizer_mut(&mut self, arm: usize) -> &mut RewardNormalizer {
        match self.history_scope {
            HistoryScope::Global => &mut self.normalizers[0],
            HistoryScope::PerArm => &mut self.normalizers[arm],
        }
    }

    /// Normalizes `raw_reward` against the relevant history, appends it, and
    /// feeds the normalized value to the selector. Returns the normalized value.
    pub fn observe(&mut self, choice: &ArmChoice, context: &[f64], raw_reward: f64) -> Result<f64> {
        ensure!(
            choice.arm < self.num_arms(),
            Contract,
            "arm {} out of range for {} arms",
            choice.arm,
            self.num_arms()
        );
        let normalized = self.normalizer_mut(choice.arm).normalize(raw_reward)?;
        self.algorithm.selector().update(choice, context, normalized)?;
        Ok(normalized)
    }

    /// Feeds an already-normalized reward without touching the history.
    pub fn update_normalized(&mut self, choice: &ArmChoice, context: &[f64], reward: f64) -> Result<()> {
        self.algorithm.selector().update(choice, context, reward)
    }
}
