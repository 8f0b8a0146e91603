use serde::{Deserialize, Serialize};

use super::{ArmChoice, ArmSelector};
use crate::error::{ensure, Error, Result};
use crate::numerics::{RngStream, SpdMatrix, Vector};

/// Per-arm LinUCB statistics. `a_inv` is kept equal to `A⁻¹` where
/// `A = I + Σ c cᵀ` over the contexts this arm was pulled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinUcbArm {
    pub a_inv: SpdMatrix,
    pub b: Vector,
    pub pulls: u64,
}

impl LinUcbArm {
    /// `A = I` with the given initial `b`.
    pub fn new(b: Vector) -> Self {
        Self {
            a_inv: SpdMatrix::identity(b.dim()),
            b,
            pulls: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// `θ̂ = A⁻¹ b`.
    pub fn theta(&self) -> Vec<f64> {
        self.a_inv.mul_vec(&self.b)
    }

    /// `cᵀθ̂ + α √(cᵀ A⁻¹ c)`.
    pub fn ucb(&self, context: &[f64], alpha: f64) -> Result<f64> {
        ensure!(
            context.len() == self.dim(),
            Contract,
            "context has dimension {}, arm expects {}",
            context.len(),
            self.dim()
        );
        let estimate: f64 = self.theta().iter().zip(context).map(|(t, c)| t * c).sum();
        let width = self.a_inv.quadratic_form(context).max(0.0).sqrt();
        Ok(estimate + alpha * width)
    }

    pub fn update(&mut self, context: &[f64], reward: f64) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&reward),
            Contract,
            "LinUCB reward {reward} outside [0, 1]"
        );
        ensure!(
            context.len() == self.dim(),
            Contract,
            "context has dimension {}, arm expects {}",
            context.len(),
            self.dim()
        );
        self.a_inv.rank_one_inverse_update(context)?;
        self.b.axpy(reward, context);
        self.pulls += 1;
        Ok(())
    }
}

fn ucb_scores(arms: &[LinUcbArm], context: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if arms.is_empty() {
        return Err(Error::Config("LinUCB needs at least one arm".into()));
    }
    ensure!(alpha >= 0.0, Contract, "alpha must be non-negative, got {alpha}");
    arms.iter().map(|a| a.ucb(context, alpha)).collect()
}

fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the arm with the highest upper confidence bound; ties go to the
/// lowest index.
pub fn linucb_select(arms: &[LinUcbArm], context: &[f64], alpha: f64) -> Result<usize> {
    Ok(first_argmax(&ucb_scores(arms, context, alpha)?))
}

pub fn linucb_update(arm: &LinUcbArm, context: &[f64], normalized_reward: f64) -> Result<LinUcbArm> {
    let mut out = arm.clone();
    out.update(context, normalized_reward)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinUcb {
    pub alpha: f64,
    pub arms: Vec<LinUcbArm>,
}

impl LinUcb {
    /// Fresh arms with `A = I` and `b ~ N(0, init_sd²)` per coordinate.
    pub fn new(num_arms: usize, dim: usize, alpha: f64, init_sd: f64, rng: &mut RngStream) -> Result<Self> {
        use rand::Rng;
        use rand_distr::StandardNormal;

        if num_arms == 0 {
            return Err(Error::Config("LinUCB needs at least one arm".into()));
        }
        ensure!(dim > 0, Config, "context dimension must be positive");
        ensure!(alpha >= 0.0, Config, "alpha must be non-negative, got {alpha}");
        let arms = (0..num_arms)
            .map(|_| {
                let b: Vec<f64> = (0..dim)
                    .map(|_| init_sd * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                LinUcbArm::new(b.into())
            })
            .collect();
        Ok(Self { alpha, arms })
    }
}

impl ArmSelector for LinUcb {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn select(&mut self, context: &[f64], _rng: &mut RngStream) -> Result<ArmChoice> {
        let scores = ucb_scores(&self.arms, context, self.alpha)?;
        Ok(ArmChoice {
            arm: first_argmax(&scores),
            probability: 1.0,
            diagnostics: scores,
        })
    }

    fn update(&mut self, choice: &ArmChoice, context: &[f64], reward: f64) -> Result<()> {
        let arm = self
            .arms
            .get_mut(choice.arm)
            .ok_or_else(|| Error::Contract(format!("arm {} out of range", choice.arm)))?;
        arm.update(context, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm_with(a: f64, b: f64) -> LinUcbArm {
        LinUcbArm {
            a_inv: SpdMatrix::from_row_major(1, vec![1.0 / a]).unwrap(),
            b: vec![b].into(),
            pulls: 0,
        }
    }

    #[test]
    fn cold_start_tie_goes_to_arm_zero() {
        let arms = vec![LinUcbArm::new(Vector::zeros(3)); 4];
        assert_eq!(linucb_select(&arms, &[0.0; 3], 1.0).unwrap(), 0);
    }

    #[test]
    fn scalar_upper_confidence_bound() {
        let arms = [arm_with(2.0, 1.0), arm_with(1.0, 0.0)];
        let s0 = arms[0].ucb(&[1.0], 1.0).unwrap();
        assert!((s0 - (0.5 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!((s0 - 1.2071).abs() < 1e-4);
        assert_eq!(arms[1].ucb(&[1.0], 1.0).unwrap(), 1.0);
        assert_eq!(linucb_select(&arms, &[1.0], 1.0).unwrap(), 0);
    }

    #[test]
    fn exploitation_only() {
        let arms = vec![
            LinUcbArm::new(vec![1.0, 0.0].into()),
            LinUcbArm::new(vec![0.0, 1.0].into()),
        ];
        assert_eq!(linucb_select(&arms, &[1.0, 0.0], 0.0).unwrap(), 0);
        assert_eq!(linucb_select(&arms, &[0.0, 1.0], 0.0).unwrap(), 1);
    }

    #[test]
    fn identity_update() {
        let arm = linucb_update(&arm_with(1.0, 0.0), &[1.0], 1.0).unwrap();
        assert_eq!(arm.a_inv.as_row_major(), &[0.5]);
        assert_eq!(&*arm.b, &[1.0]);
        assert_eq!(arm.pulls, 1);
    }

    #[test]
    fn zero_reward_still_accumulates_design() {
        let arm = LinUcbArm::new(vec![0.3, -0.1].into());
        let out = linucb_update(&arm, &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(out.b, arm.b);
        assert_ne!(out.a_inv, arm.a_inv);
    }

    #[test]
    fn update_rejects_out_of_range_reward() {
        let arm = LinUcbArm::new(Vector::zeros(1));
        assert!(matches!(linucb_update(&arm, &[1.0], 1.5), Err(Error::Contract(_))));
        assert!(matches!(linucb_update(&arm, &[1.0], -0.1), Err(Error::Contract(_))));
    }

    #[test]
    fn select_errors() {
        assert!(matches!(linucb_select(&[], &[1.0], 1.0), Err(Error::Config(_))));
        let arms = [LinUcbArm::new(Vector::zeros(2))];
        assert!(matches!(linucb_select(&arms, &[1.0], 1.0), Err(Error::Contract(_))));
    }
}
