use serde::{Deserialize, Serialize};

use crate::numerics::Vector;

/// One training (or best-of-n) step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Iteration `m`, zero-based.
    pub iteration: usize,
    /// Global step index across iterations, zero-based.
    pub step: usize,
    pub context: Vector,
    /// Selected scorer, or `None` for ensembles.
    pub chosen_arm: Option<usize>,
    /// Weight each scorer had in labelling this batch (one-hot for single
    /// selection, uniform for the score/agreement ensembles).
    pub arm_weights: Vec<f64>,
    /// Training loss after the batch's update; 0 when the batch had no pairs.
    pub raw_loss: f64,
    pub normalized_reward: f64,
    /// UCB scores, Exp3 probabilities, ensemble weights or classifier
    /// one-hot, depending on the strategy.
    pub diagnostics: Vec<f64>,
    /// Queries of each category in the batch.
    pub category_counts: Vec<usize>,
    pub num_pairs: usize,
    pub scorer_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub num_arms: usize,
    pub num_categories: usize,
    pub records: Vec<StepRecord>,
}

impl TrainTrace {
    pub fn new(num_arms: usize, num_categories: usize) -> Self {
        Self {
            num_arms,
            num_categories,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn chosen_arms(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.chosen_arm).collect()
    }

    pub fn total_scorer_calls(&self) -> u64 {
        self.records.iter().map(|r| r.scorer_calls).sum()
    }
}
