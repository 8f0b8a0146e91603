use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::classifier::{classifier_select, train_classifier, LogisticClassifier};
use super::ensemble::{online_ensemble_step, scorer_fitness, OnlineEnsembleState};
use super::pairs::{agreement_ensemble_pairs, build_preference_pairs, ensemble_scores};
use super::trace::{StepRecord, TrainTrace};
use super::{BatchGrouping, StrategyKind, TrainConfig};
use crate::bandit::{ArmChoice, BanditAlgorithm, BanditState, Exp3State, LinUcb, RewardNormalizer};
use crate::env::{Environment, Query};
use crate::error::{ensure, Error, Result};
use crate::numerics::{RngStream, Vector};
use crate::policy::{combined_loss, loss_gradient, sample_responses, sgd_step, PairSource, PolicyParams, PreferencePair};
use crate::scorers::{ScoreCache, ScorerPool};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// Final bandit state for the `laser_*` strategies.
    pub bandit: Option<BanditState>,
    /// Final weights for `online_ensemble`.
    pub online: Option<OnlineEnsembleState>,
    pub trace: TrainTrace,
}

/// Starting policy: `policy_init` along the gold direction plus an isotropic
/// Gaussian perturbation of the same expected norm, so training has both
/// something to sharpen and something to correct.
pub fn initial_policy(env: &Environment, policy_init: f64, rng: &mut RngStream) -> PolicyParams {
    let d = env.config.response_dim;
    let scale = policy_init / (d as f64).sqrt();
    let theta: Vec<f64> = env
        .gold_direction
        .iter()
        .map(|w| policy_init * w + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    PolicyParams::new(theta.into())
}

/// Labelled contexts for the classifier baseline: each training query's
/// features, labelled with the scorer that separates its gold-best and
/// gold-worst responses by the widest (correctly signed) margin.
pub fn classifier_labels(env: &Environment, pool: &ScorerPool, cache: &mut ScoreCache) -> Result<Vec<(Vector, usize)>> {
    env.train
        .iter()
        .map(|q| {
            let (best, worst) = (q.gold_best(), q.gold_worst());
            let mut label = 0;
            let mut widest = f64::NEG_INFINITY;
            for k in 0..pool.len() {
                let margin = cache.get(pool, k, q, best)? - cache.get(pool, k, q, worst)?;
                if margin > widest {
                    widest = margin;
                    label = k;
                }
            }
            Ok((q.features.clone(), label))
        })
        .collect()
}

pub(crate) struct BatchSampler {
    by_category: Vec<Vec<usize>>,
    all: usize,
    grouping: BatchGrouping,
    size: usize,
}

impl BatchSampler {
    pub(crate) fn new(queries: &[Query], categories: usize, grouping: BatchGrouping, size: usize) -> Result<Self> {
        ensure!(!queries.is_empty(), Config, "training split is empty");
        let mut by_category = vec![Vec::new(); categories];
        for (i, q) in queries.iter().enumerate() {
            ensure!(q.category < categories, Contract, "query {} has category {}", q.id, q.category);
            by_category[q.category].push(i);
        }
        by_category.retain(|c| !c.is_empty());
        Ok(Self {
            by_category,
            all: queries.len(),
            grouping,
            size,
        })
    }

    pub(crate) fn draw(&self, rng: &mut RngStream) -> Vec<usize> {
        match self.grouping {
            BatchGrouping::Category => {
                let group = &self.by_category[rng.random_range(0..self.by_category.len())];
                let take = self.size.min(group.len());
                index::sample(rng, group.len(), take).into_iter().map(|i| group[i]).collect()
            }
            BatchGrouping::Mixed => index::sample(rng, self.all, self.size.min(self.all)).into_vec(),
        }
    }
}

pub(crate) fn batch_context(batch: &[&Query]) -> Vector {
    let dim = batch[0].features.dim();
    let mut ctx = Vector::zeros(dim);
    for q in batch {
        ctx.axpy(1.0 / batch.len() as f64, &q.features);
    }
    ctx
}

pub(crate) fn category_counts(batch: &[&Query], categories: usize) -> Vec<usize> {
    let mut counts = vec![0; categories];
    for q in batch {
        counts[q.category] += 1;
    }
    counts
}

/// A fresh bandit for a `laser_*` strategy.
pub fn fresh_bandit(
    strategy: StrategyKind,
    config: &TrainConfig,
    pool: &ScorerPool,
    context_dim: usize,
    rng: &mut RngStream,
) -> Result<BanditState> {
    let algorithm = match strategy {
        StrategyKind::LaserLinucb => BanditAlgorithm::LinUcb(LinUcb::new(
            pool.len(),
            context_dim,
            config.alpha,
            config.bandit_init_sd,
            rng,
        )?),
        StrategyKind::LaserExp3 => BanditAlgorithm::Exp3(Exp3State::new(pool.len(), config.gamma)?),
        other => return Err(Error::Config(format!("{other} does not use a bandit"))),
    };
    Ok(BanditState::new(algorithm, config.history_scope))
}

pub(crate) fn check_bandit(bandit: &BanditState, pool: &ScorerPool, context_dim: usize) -> Result<()> {
    ensure!(
        bandit.num_arms() == pool.len(),
        Config,
        "bandit has {} arms but the pool has {} scorers",
        bandit.num_arms(),
        pool.len()
    );
    if let Some(d) = bandit.context_dim() {
        ensure!(d == context_dim, Config, "bandit context dimension {d} does not match the environment's {context_dim}");
    }
    Ok(())
}

enum Runtime {
    Bandit(BanditState),
    Fixed(usize),
    Random,
    Sequential,
    Classifier {
        model: LogisticClassifier,
        /// Maps classifier classes back to scorer indices.
        classes: Vec<usize>,
    },
    ScoreEnsemble,
    AgreementEnsemble,
    Online(OnlineEnsembleState),
}

/// How this step's pairs get labelled.
enum Labeling {
    Single { arm: usize, choice: Option<ArmChoice> },
    Weighted { weights: Vec<f64>, source: PairSource },
    Agreement,
}

fn one_hot(k: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[k] = 1.0;
    v
}

/// Runs the selection-and-training loop for `strategy`.
///
/// `bandit` seeds a `laser_*` strategy with an existing state (cold start);
/// it must be `None` for the other strategies.
pub fn train(
    config: &TrainConfig,
    env: &Environment,
    pool: &ScorerPool,
    strategy: StrategyKind,
    rng: &RngStream,
    bandit: Option<BanditState>,
) -> Result<TrainOutcome> {
    config.validate()?;
    pool.validate(Some(env.num_categories()))?;
    let k = pool.len();
    let context_dim = env.config.context_dim;
    let seed = rng.seed();
    let mut cache = ScoreCache::new(seed, pool, env.num_queries(), env.config.universe_size);

    let mut runtime = match strategy {
        StrategyKind::LaserLinucb | StrategyKind::LaserExp3 => {
            let state = match bandit {
                Some(state) => {
                    let expected = if strategy == StrategyKind::LaserLinucb { "linucb" } else { "exp3" };
                    ensure!(
                        state.algorithm.tag() == expected,
                        Config,
                        "loaded {} state cannot drive {strategy}",
                        state.algorithm.tag()
                    );
                    check_bandit(&state, pool, context_dim)?;
                    state
                }
                None => fresh_bandit(strategy, config, pool, context_dim, &mut rng.derive("bandit-init"))?,
            };
            Runtime::Bandit(state)
        }
        _ if bandit.is_some() => {
            return Err(Error::Config(format!("{strategy} cannot start from a bandit state")));
        }
        StrategyKind::BestFixed => {
            let arm = config.fixed_arm.unwrap_or_else(|| pool.best_overall());
            ensure!(arm < k, Config, "fixed_arm {arm} out of range for {k} scorers");
            Runtime::Fixed(arm)
        }
        StrategyKind::AvgSingle => {
            return Err(Error::Config(
                "avg_single runs one best_fixed trial per scorer; run it through the harness".into(),
            ))
        }
        StrategyKind::Random => Runtime::Random,
        StrategyKind::Sequential => Runtime::Sequential,
        StrategyKind::Classifier => {
            let labelled = classifier_labels(env, pool, &mut cache)?;
            let mut classes: Vec<usize> = labelled.iter().map(|(_, y)| *y).collect();
            classes.sort_unstable();
            classes.dedup();
            let compact: Vec<(Vector, usize)> = labelled
                .into_iter()
                .map(|(x, y)| (x, classes.binary_search(&y).expect("label present")))
                .collect();
            let model = train_classifier(&compact, classes.len(), &config.classifier)?;
            Runtime::Classifier { model, classes }
        }
        StrategyKind::ScoreEnsemble => Runtime::ScoreEnsemble,
        StrategyKind::AgreementEnsemble => Runtime::AgreementEnsemble,
        StrategyKind::OnlineEnsemble => Runtime::Online(OnlineEnsembleState::uniform(k, config.eta)?),
    };

    let sampler = BatchSampler::new(&env.train, env.num_categories(), config.batch_grouping, config.batch_size)?;
    let mut batch_rng = rng.derive("batch");
    let mut select_rng = rng.derive("select");
    let mut sample_rng = rng.derive("sample");
    let mut pair_rng = rng.derive("pairs");
    let mut params = initial_policy(env, config.policy_init, &mut rng.derive("policy-init"));
    // Reward history for strategies without a bandit, kept so every trace
    // reports the same normalized signal.
    let mut normalizer = RewardNormalizer::default();
    let mut trace = TrainTrace::new(k, env.num_categories());
    let n = config.samples_per_query;

    for iteration in 0..config.iterations {
        let reference = params.snapshot();
        for t in 0..config.steps_per_iteration {
            let step = iteration * config.steps_per_iteration + t;
            let mut body = || -> Result<StepRecord> {
                let batch: Vec<&Query> = sampler.draw(&mut batch_rng).into_iter().map(|i| &env.train[i]).collect();
                let context = batch_context(&batch);
                let counts = category_counts(&batch, env.num_categories());

                let (labeling, diagnostics) = match &mut runtime {
                    Runtime::Bandit(state) => {
                        let choice = state.select(&context, &mut select_rng)?;
                        let diag = choice.diagnostics.clone();
                        (
                            Labeling::Single {
                                arm: choice.arm,
                                choice: Some(choice),
                            },
                            diag,
                        )
                    }
                    Runtime::Fixed(arm) => (Labeling::Single { arm: *arm, choice: None }, one_hot(*arm, k)),
                    Runtime::Random => {
                        let arm = select_rng.random_range(0..k);
                        (Labeling::Single { arm, choice: None }, vec![1.0 / k as f64; k])
                    }
                    Runtime::Sequential => (Labeling::Single { arm: step % k, choice: None }, one_hot(step % k, k)),
                    Runtime::Classifier { model, classes } => {
                        let arm = classes[classifier_select(model, &context)?];
                        (Labeling::Single { arm, choice: None }, one_hot(arm, k))
                    }
                    Runtime::ScoreEnsemble => (
                        Labeling::Weighted {
                            weights: vec![1.0 / k as f64; k],
                            source: PairSource::ScoreEnsemble,
                        },
                        vec![1.0 / k as f64; k],
                    ),
                    Runtime::AgreementEnsemble => (Labeling::Agreement, vec![1.0 / k as f64; k]),
                    Runtime::Online(state) => (
                        Labeling::Weighted {
                            weights: state.weights.clone(),
                            source: PairSource::OnlineEnsemble,
                        },
                        state.weights.clone(),
                    ),
                };

                let mut pairs: Vec<PreferencePair> = Vec::new();
                let mut calls = 0u64;
                for q in &batch {
                    let responses = sample_responses(&params, q, n, config.temperature, &mut sample_rng)?;
                    match &labeling {
                        Labeling::Single { arm, .. } => {
                            let scores = responses
                                .iter()
                                .map(|&r| cache.get(pool, *arm, q, r))
                                .collect::<Result<Vec<_>>>()?;
                            calls += n as u64;
                            pairs.extend(build_preference_pairs(
                                q,
                                &responses,
                                &scores,
                                config.pairs_per_query,
                                PairSource::Scorer(*arm),
                                &mut pair_rng,
                            )?);
                        }
                        Labeling::Weighted { weights, source } => {
                            let all = score_all(&mut cache, pool, q, &responses)?;
                            calls += (n * k) as u64;
                            let z = config.z_normalize;
                            let combined = ensemble_scores(&all, weights, z)?;
                            pairs.extend(build_preference_pairs(
                                q,
                                &responses,
                                &combined,
                                config.pairs_per_query,
                                *source,
                                &mut pair_rng,
                            )?);
                        }
                        Labeling::Agreement => {
                            let all = score_all(&mut cache, pool, q, &responses)?;
                            calls += (n * k) as u64;
                            pairs.extend(agreement_ensemble_pairs(
                                q,
                                &responses,
                                &all,
                                config.agreement_candidates,
                                config.agreement_keep,
                                &mut pair_rng,
                            )?);
                        }
                    }
                }

                let (chosen_arm, arm_weights) = match &labeling {
                    Labeling::Single { arm, .. } => (Some(*arm), one_hot(*arm, k)),
                    Labeling::Weighted { weights, .. } => (None, weights.clone()),
                    Labeling::Agreement => (None, vec![1.0 / k as f64; k]),
                };

                let (raw_loss, normalized_reward) = if pairs.is_empty() {
                    (0.0, RewardNormalizer::WARM_UP)
                } else {
                    let grad = loss_gradient(&params, &reference, &pairs, config.beta, config.loss)?;
                    params = sgd_step(&params, &grad, config.learning_rate)?;
                    let loss = combined_loss(&params, &reference, &pairs, config.beta, config.loss)?;
                    let normalized = match (&mut runtime, &labeling) {
                        (Runtime::Bandit(state), Labeling::Single { choice: Some(choice), .. })
                            if !config.freeze_bandit =>
                        {
                            state.observe(choice, &context, -loss)?
                        }
                        (Runtime::Online(state), _) => {
                            let fitness = scorer_fitness(&pairs, k, |j, p| {
                                Ok((cache.get(pool, j, p.query, p.winner)?, cache.get(pool, j, p.query, p.loser)?))
                            })?;
                            *state = online_ensemble_step(state, &fitness)?;
                            normalizer.normalize(-loss)?
                        }
                        _ => normalizer.normalize(-loss)?,
                    };
                    (loss, normalized)
                };

                Ok(StepRecord {
                    iteration,
                    step,
                    context,
                    chosen_arm,
                    arm_weights,
                    raw_loss,
                    normalized_reward,
                    diagnostics,
                    category_counts: counts,
                    num_pairs: pairs.len(),
                    scorer_calls: calls,
                })
            };
            let record = body().map_err(|e| Error::AtStep {
                iteration,
                step,
                source: Box::new(e),
            })?;
            trace.records.push(record);
        }
    }

    let (bandit, online) = match runtime {
        Runtime::Bandit(state) => (Some(state), None),
        Runtime::Online(state) => (None, Some(state)),
        _ => (None, None),
    };
    Ok(TrainOutcome {
        params,
        bandit,
        online,
        trace,
    })
}

/// `scores[k][i]`: scorer `k` on the i-th sampled response.
pub(crate) fn score_all(cache: &mut ScoreCache, pool: &ScorerPool, q: &Query, responses: &[usize]) -> Result<Vec<Vec<f64>>> {
    (0..pool.len())
        .map(|k| responses.iter().map(|&r| cache.get(pool, k, q, r)).collect())
        .collect()
}
