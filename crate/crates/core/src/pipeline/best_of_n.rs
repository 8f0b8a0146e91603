use super::train::{batch_context, category_counts, BatchSampler};
use super::trace::{StepRecord, TrainTrace};
use super::TrainConfig;
use crate::bandit::{BanditState, RewardNormalizer};
use crate::env::{normalized_gold, Environment, Query};
use crate::error::{ensure, Error, Result};
use crate::numerics::{mean, RngStream};
use crate::policy::{logprob, sample_responses, PolicyParams};
use crate::scorers::{ScoreCache, ScorerPool};

#[derive(Debug, Clone)]
pub struct BestOfNOutcome {
    pub bandit: BanditState,
    /// One record per bandit-training batch.
    pub trace: TrainTrace,
    /// Scorer chosen for each test query at inference.
    pub test_arms: Vec<usize>,
    /// Mean normalized gold quality of the returned test responses.
    pub mean_gold_quality: f64,
    /// Mean raw gold quality of the returned test responses.
    pub mean_raw_gold: f64,
    pub inference_scorer_calls: u64,
}

/// Index of the first maximum.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn pick(
    cache: &mut ScoreCache,
    pool: &ScorerPool,
    arm: usize,
    query: &Query,
    responses: &[usize],
) -> Result<usize> {
    let scores = responses
        .iter()
        .map(|&r| cache.get(pool, arm, query, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(responses[argmax_first(&scores)])
}

/// Trains `bandit` to pick the scorer for best-of-n reranking under a frozen
/// `policy`, then applies it to the test split without further updates.
///
/// The raw bandit reward is the negative mean length-normalized NLL of the
/// chosen responses under `policy`.
pub fn best_of_n_run(
    config: &TrainConfig,
    env: &Environment,
    pool: &ScorerPool,
    mut bandit: BanditState,
    policy: &PolicyParams,
    rng: &RngStream,
) -> Result<BestOfNOutcome> {
    config.validate()?;
    pool.validate(Some(env.num_categories()))?;
    super::train::check_bandit(&bandit, pool, env.config.context_dim)?;
    ensure!(!env.test.is_empty(), Config, "best-of-n needs a non-empty test split");
    let k = pool.len();
    let n = config.samples_per_query;
    let mut cache = ScoreCache::new(rng.seed(), pool, env.num_queries(), env.config.universe_size);
    let sampler = BatchSampler::new(&env.train, env.num_categories(), config.batch_grouping, config.batch_size)?;
    let mut batch_rng = rng.derive("batch");
    let mut select_rng = rng.derive("select");
    let mut sample_rng = rng.derive("sample");
    let mut trace = TrainTrace::new(k, env.num_categories());
    let mut frozen_normalizer = RewardNormalizer::default();

    for step in 0..config.total_steps() {
        let iteration = step / config.steps_per_iteration;
        let mut body = || -> Result<StepRecord> {
            let batch: Vec<&Query> = sampler.draw(&mut batch_rng).into_iter().map(|i| &env.train[i]).collect();
            let context = batch_context(&batch);
            let choice = bandit.select(&context, &mut select_rng)?;
            let mut nll = Vec::with_capacity(batch.len());
            for q in &batch {
                let responses = sample_responses(policy, q, n, config.temperature, &mut sample_rng)?;
                let chosen = pick(&mut cache, pool, choice.arm, q, &responses)?;
                nll.push(-logprob(policy, q, chosen)? / q.universe[chosen].length as f64);
            }
            let raw_loss = mean(&nll);
            let normalized_reward = if config.freeze_bandit {
                frozen_normalizer.normalize(-raw_loss)?
            } else {
                bandit.observe(&choice, &context, -raw_loss)?
            };
            let mut weights = vec![0.0; k];
            weights[choice.arm] = 1.0;
            Ok(StepRecord {
                iteration,
                step,
                category_counts: category_counts(&batch, env.num_categories()),
                context,
                chosen_arm: Some(choice.arm),
                arm_weights: weights,
                raw_loss,
                normalized_reward,
                diagnostics: choice.diagnostics,
                num_pairs: 0,
                scorer_calls: (batch.len() * n) as u64,
            })
        };
        let record = body().map_err(|e| Error::AtStep {
            iteration,
            step,
            source: Box::new(e),
        })?;
        trace.records.push(record);
    }

    let mut infer_rng = rng.derive("inference");
    let mut test_arms = Vec::with_capacity(env.test.len());
    let (mut normalized, mut raw) = (0.0, 0.0);
    for q in &env.test {
        let choice = bandit.select(&q.features, &mut select_rng)?;
        let responses = sample_responses(policy, q, n, config.temperature, &mut infer_rng)?;
        let chosen = pick(&mut cache, pool, choice.arm, q, &responses)?;
        let gold = q.universe[chosen].gold_quality;
        normalized += normalized_gold(q, gold);
        raw += gold;
        test_arms.push(choice.arm);
    }
    let count = env.test.len() as f64;
    Ok(BestOfNOutcome {
        bandit,
        trace,
        test_arms,
        mean_gold_quality: normalized / count,
        mean_raw_gold: raw / count,
        inference_scorer_calls: (env.test.len() * n) as u64,
    })
}
