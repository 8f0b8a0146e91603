use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArmChoice, ArmSelector};
use crate::error::{ensure, Error, Result};
use crate::numerics::{RngStream, Vector};

/// Exponential-weights state over arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3State {
    /// Cumulative importance-weighted scores `S_k`.
    pub scores: Vector,
    /// Exploration mix in `(0, 1]` (0 is accepted for pure exploitation).
    pub gamma: f64,
    /// Largest spread `max S − min S` kept after an update; scores further
    /// below the maximum are clamped, which changes probabilities by less
    /// than `exp(-overflow_bound)`.
    pub overflow_bound: f64,
}

impl Exp3State {
    pub const DEFAULT_OVERFLOW_BOUND: f64 = 700.0;

    pub fn new(num_arms: usize, gamma: f64) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::Config("Exp3 needs at least one arm".into()));
        }
        ensure!((0.0..=1.0).contains(&gamma), Config, "gamma {gamma} outside [0, 1]");
        Ok(Self {
            scores: Vector::zeros(num_arms),
            gamma,
            overflow_bound: Self::DEFAULT_OVERFLOW_BOUND,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.scores.dim()
    }
}

/// `p_k = (1−γ)·softmax(S)_k + γ/K`.
pub fn exp3_probabilities(state: &Exp3State) -> Vec<f64> {
    let k = state.scores.dim() as f64;
    let max = state.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = state.scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| (1.0 - state.gamma) * w / total + state.gamma / k)
        .collect()
}

/// Draws an arm from the Exp3 distribution; returns it with its probability.
pub fn exp3_select(state: &Exp3State, rng: &mut RngStream) -> (usize, f64) {
    let probs = exp3_probabilities(state);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return (i, *p);
        }
    }
    // u landed in the rounding slack above the cumulative sum.
    let last = probs.len() - 1;
    (last, probs[last])
}

/// `S_arm += reward / probability`; other arms untouched.
pub fn exp3_update(state: &Exp3State, arm: usize, normalized_reward: f64, probability: f64) -> Result<Exp3State> {
    let mut out = state.clone();
    out.apply(arm, normalized_reward, probability)?;
    Ok(out)
}

impl Exp3State {
    fn apply(&mut self, arm: usize, reward: f64, probability: f64) -> Result<()> {
        ensure!(
            probability > 0.0 && probability <= 1.0,
            Contract,
            "selection probability {probability} outside (0, 1]"
        );
        ensure!((0.0..=1.0).contains(&reward), Contract, "Exp3 reward {reward} outside [0, 1]");
        ensure!(arm < self.scores.dim(), Contract, "arm {arm} out of range");
        if reward == 0.0 {
            return Ok(());
        }
        self.scores[arm] += reward / probability;
        let max = self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.scores.iter().copied().fold(f64::INFINITY, f64::min);
        if max - min > self.overflow_bound {
            for s in self.scores.iter_mut() {
                *s = (*s - max).max(-self.overflow_bound);
            }
        }
        Ok(())
    }
}

impl ArmSelector for Exp3State {
    fn num_arms(&self) -> usize {
        self.scores.dim()
    }

    fn select(&mut self, _context: &[f64], rng: &mut RngStream) -> Result<ArmChoice> {
        let (arm, probability) = exp3_select(self, rng);
        Ok(ArmChoice {
            arm,
            probability,
            diagnostics: exp3_probabilities(self),
        })
    }

    fn update(&mut self, choice: &ArmChoice, _context: &[f64], reward: f64) -> Result<()> {
        self.apply(choice.arm, reward, choice.probability)
    }
}
