use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::quantile;

/// Whether rewards are normalized against one shared history or one per arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryScope {
    #[default]
    Global,
    PerArm,
}

/// Maps raw rewards into `[0, 1]` using low/high quantiles of past rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub history: Vec<f64>,
    pub q_lo_level: f64,
    pub q_hi_level: f64,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        Self {
            history: Vec::new(),
            q_lo_level: 0.2,
            q_hi_level: 0.8,
        }
    }
}

impl RewardNormalizer {
    /// Value returned while the history cannot define an interval.
    pub const WARM_UP: f64 = 0.5;

    /// Scales `raw` against the current history without recording it.
    pub fn scale(&self, raw: f64) -> Result<f64> {
        ensure!(raw.is_finite(), Contract, "raw reward {raw} is not finite");
        if self.history.len() < 2 {
            return Ok(Self::WARM_UP);
        }
        let lo = quantile(&self.history, self.q_lo_level)?;
        let hi = quantile(&self.history, self.q_hi_level)?;
        if hi <= lo {
            return Ok(Self::WARM_UP);
        }
        Ok(if raw < lo {
            0.0
        } else if raw > hi {
            1.0
        } else {
            ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
        })
    }

    /// Scales `raw` against the history as it stood before this call, then
    /// appends `raw`.
    pub fn normalize(&mut self, raw: f64) -> Result<f64> {
        let out = self.scale(raw)?;
        self.history.push(raw);
        Ok(out)
    }
}

pub fn normalize_reward(normalizer: &RewardNormalizer, raw: f64) -> Result<(f64, RewardNormalizer)> {
    let mut next = normalizer.clone();
    let out = next.normalize(raw)?;
    Ok((out, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn with_history(h: &[f64]) -> RewardNormalizer {
        RewardNormalizer {
            history: h.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn midpoint_of_quantile_interval() {
        // q20: h = 0.2·5 = 1 → -2.0; q80: h = 0.8·5 = 4 → -1.0
        let h = with_history(&[-2.0, -2.0, -1.5, -1.0, -1.0, -1.0]);
        let (out, next) = normalize_reward(&h, -1.5).unwrap();
        assert!((out - 0.5).abs() < 1e-15);
        assert_eq!(next.history.len(), 7);
    }

    #[test]
    fn clamps_outside_the_interval() {
        let h = with_history(&[-2.0, -2.0, -1.5, -1.0, -1.0, -1.0]);
        assert_eq!(h.scale(-3.0).unwrap(), 0.0);
        assert_eq!(h.scale(0.0).unwrap(), 1.0);
        // Boundaries themselves are interior.
        assert_eq!(h.scale(-2.0).unwrap(), 0.0);
        assert_eq!(h.scale(-1.0).unwrap(), 1.0);
    }

    #[test]
    fn warm_up_and_degenerate_histories() {
        let mut n = RewardNormalizer::default();
        assert_eq!(n.normalize(-0.7).unwrap(), 0.5);
        assert_eq!(n.normalize(-0.1).unwrap(), 0.5);
        assert_ne!(n.normalize(-0.4).unwrap(), 0.5);
        let flat = with_history(&[1.0, 1.0, 1.0]);
        assert_eq!(flat.scale(5.0).unwrap(), 0.5);
    }

    #[test]
    fn normalizes_against_history_before_appending() {
        // Against {0, 1} the interval is [0.2, 0.8], so 0.9 saturates; had 0.9
        // been appended first, q80 would move to 0.96 and the answer would be < 1.
        let mut n = with_history(&[0.0, 1.0]);
        assert_eq!(n.normalize(0.9).unwrap(), 1.0);
        assert_eq!(n.history, vec![0.0, 1.0, 0.9]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut n = RewardNormalizer::default();
        assert!(matches!(n.normalize(f64::NAN), Err(Error::Contract(_))));
        assert!(n.history.is_empty());
    }
}
