use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::{log_sigmoid, Tolerances};
use crate::policy::PreferencePair;

/// Multiplicative-weights state over the scorer pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineEnsembleState {
    pub weights: Vec<f64>,
    pub eta: f64,
}

impl OnlineEnsembleState {
    pub fn uniform(num_scorers: usize, eta: f64) -> Result<Self> {
        ensure!(num_scorers > 0, Config, "online ensemble needs at least one scorer");
        ensure!(eta >= 0.0 && eta.is_finite(), Config, "eta must be non-negative, got {eta}");
        Ok(Self {
            weights: vec![1.0 / num_scorers as f64; num_scorers],
            eta,
        })
    }

    pub fn is_simplex(&self) -> bool {
        let sum: f64 = self.weights.iter().sum();
        self.weights.iter().all(|w| *w >= 0.0) && (sum - 1.0).abs() <= Tolerances::DEFAULT.normalization
    }
}

/// `w_k ← w_k·exp(η·fitness_k)`, renormalized.
pub fn online_ensemble_step(state: &OnlineEnsembleState, fitness: &[f64]) -> Result<OnlineEnsembleState> {
    ensure!(
        fitness.len() == state.weights.len(),
        Contract,
        "{} fitness values for {} scorers",
        fitness.len(),
        state.weights.len()
    );
    ensure!(fitness.iter().all(|f| f.is_finite()), Contract, "fitness must be finite");
    // Work in log space, shifted by the max, so large η·fitness cannot overflow.
    let logs: Vec<f64> = state
        .weights
        .iter()
        .zip(fitness)
        .map(|(w, f)| if *w > 0.0 { w.ln() + state.eta * f } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(OnlineEnsembleState {
        weights: raw.into_iter().map(|w| w / total).collect(),
        eta: state.eta,
    })
}

/// Fitness of each scorer on the batch's ensemble-labelled pairs: the
/// negative mean logistic loss of its own score margin `s_k(w) − s_k(l)`.
///
/// `score_of(k, pair)` returns scorer `k`'s `(winner, loser)` scores.
pub fn scorer_fitness(
    pairs: &[PreferencePair],
    num_scorers: usize,
    mut score_of: impl FnMut(usize, &PreferencePair) -> Result<(f64, f64)>,
) -> Result<Vec<f64>> {
    ensure!(!pairs.is_empty(), Contract, "fitness needs at least one pair");
    (0..num_scorers)
        .map(|k| {
            let mut total = 0.0;
            for p in pairs {
                let (w, l) = score_of(k, p)?;
                total += log_sigmoid(w - l);
            }
            Ok(total / pairs.len() as f64)
        })
        .collect()
}
