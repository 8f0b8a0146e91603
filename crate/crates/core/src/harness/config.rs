//! Experiment configuration files.
//!
//! The format is TOML, parsed strictly: unknown keys anywhere are errors.
//! Only `run.strategy`, `run.seeds` and `environment.seed` are required;
//! everything else falls back to the documented defaults.
//!
//! ```toml
//! [run]
//! strategy = "laser_linucb"
//! seeds = [0, 1, 2]
//! mode = "train"          # or "best_of_n"
//!
//! [environment]
//! seed = 7
//!
//! [training]
//! steps_per_iteration = 2000
//!
//! [pool]
//! injected_noise = 0.2
//!
//! [[pool.scorers]]        # omit to use the default four-scorer pool
//! id = "rm0"
//! affinity = [0.9, 0.5, 0.5, 0.5]
//! noise_sigma = 0.1
//! bias = 0.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvironmentConfig;
use crate::error::{ensure, Error, Result};
use crate::pipeline::{StrategyKind, TrainConfig};
use crate::scorers::{ScorerPool, ScorerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Train,
    BestOfN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub strategy: StrategyKind,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub mode: RunMode,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Also write the generated environment as `dataset.json`.
    #[serde(default)]
    pub save_dataset: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSection {
    /// Extra Gaussian noise added to every scorer's scores.
    pub injected_noise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scorers: Option<Vec<ScorerSpec>>,
}

impl PoolSection {
    pub fn build(&self) -> Result<ScorerPool> {
        let pool = match &self.scorers {
            Some(scorers) => ScorerPool::new(scorers.clone())?,
            None => ScorerPool::default_pool(),
        };
        pool.with_injected_noise(self.injected_noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub pool: PoolSection,
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(strategy: StrategyKind, seeds: Vec<u64>, environment_seed: u64) -> Self {
        Self {
            run: RunSection {
                strategy,
                seeds,
                mode: RunMode::Train,
                out: None,
                save_dataset: false,
            },
            environment: EnvironmentConfig {
                seed: environment_seed,
                ..EnvironmentConfig::default()
            },
            training: TrainConfig::default(),
            pool: PoolSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.run.seeds.is_empty(), Config, "run.seeds is empty");
        let mut seeds = self.run.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        ensure!(seeds.len() == self.run.seeds.len(), Config, "run.seeds contains duplicates");
        if self.run.mode == RunMode::BestOfN {
            ensure!(
                self.run.strategy.is_bandit(),
                Config,
                "best_of_n mode needs a laser_* strategy, not {}",
                self.run.strategy
            );
        }
        self.environment.validate()?;
        self.training.validate()?;
        self.pool.build()?.validate(Some(self.environment.categories))?;
        if let Some(arm) = self.training.fixed_arm {
            let k = self.pool.build()?.len();
            ensure!(arm < k, Config, "training.fixed_arm = {arm} but the pool has {k} scorers");
        }
        Ok(())
    }

    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        // Required keys are checked up front so the error names them even
        // though `environment` otherwise fills in defaults.
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let seed_present = table
            .get("environment")
            .and_then(|e| e.as_table())
            .is_some_and(|e| e.contains_key("seed"));
        ensure!(seed_present, Parse, "missing required key `environment.seed`");
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The fully resolved configuration, as written next to run outputs.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))
    }
}
