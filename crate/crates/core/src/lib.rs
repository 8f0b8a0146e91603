//! Bandit-driven selection of reward scorers for iterative preference
//! optimization, on a synthetic task with a known gold reward.
//!
//! A pool of noisy [`scorers`] each ranks sampled responses well on some
//! query categories and poorly on others. Per batch, a selection strategy
//! picks a scorer (or combines several), the chosen scores become preference
//! pairs, and a toy log-linear [`policy`] takes a DPO step on them. For the
//! bandit strategies the post-step loss becomes the bandit's reward.
//!
//! - [`numerics`]: linear algebra, quantiles, softmax and seeded RNG streams.
//! - [`bandit`]: LinUCB, Exp3, reward normalization and state persistence.
//! - [`env`]: task generator, gold-quality oracle, regret and utilization.
//! - [`pipeline`]: the training loop, baselines, ensembles and best-of-n.
//! - [`harness`]: configuration, multi-seed runs, trace files and reports.

// Negated comparisons are used on purpose so that NaN fails validation.
// Index loops read closer to the matrix algebra they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandit;
pub mod env;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod pipeline;
pub mod policy;
pub mod scorers;

pub use error::{Error, Result};
