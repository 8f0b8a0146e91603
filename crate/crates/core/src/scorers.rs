//! Simulated reward models.
//!
//! A scorer's output is `affinity[category]·gold + bias + noise`. The noise
//! for a given `(scorer, query, response)` triple comes from its own labelled
//! stream, so every strategy in a run sees the same scorer outputs.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Query, ResponseCandidate};
use crate::error::{ensure, Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSpec {
    pub id: String,
    /// Affinity to gold quality per task category, in `[-1, 1]`.
    pub affinity: Vec<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub bias: f64,
}

impl ScorerSpec {
    pub fn new(id: impl Into<String>, affinity: Vec<f64>, noise_sigma: f64, bias: f64) -> Self {
        Self {
            id: id.into(),
            affinity,
            noise_sigma,
            bias,
        }
    }

    /// The labelled noise stream for one `(scorer, query, response)` triple.
    pub fn noise_stream(&self, seed: u64, query: &Query, response: &ResponseCandidate) -> RngStream {
        RngStream::new(seed, format!("score/{}/{}/{}", self.id, query.id, response.id))
    }
}

/// Scores one response. The first standard-normal draw of `rng` scales the
/// scorer's own noise; the second scales `extra_sigma` (injected noise).
pub fn score_with_extra_noise(
    scorer: &ScorerSpec,
    query: &Query,
    response: &ResponseCandidate,
    extra_sigma: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let affinity = *scorer.affinity.get(query.category).ok_or_else(|| {
        Error::Config(format!(
            "scorer {} has no affinity for category {}",
            scorer.id, query.category
        ))
    })?;
    let base: f64 = rng.sample(StandardNormal);
    let extra: f64 = rng.sample(StandardNormal);
    Ok(affinity * response.gold_quality + scorer.bias + scorer.noise_sigma * base + extra_sigma * extra)
}

pub fn score(scorer: &ScorerSpec, query: &Query, response: &ResponseCandidate, rng: &mut RngStream) -> Result<f64> {
    score_with_extra_noise(scorer, query, response, 0.0, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerPool {
    pub scorers: Vec<ScorerSpec>,
    /// Additional Gaussian noise on every score, for robustness studies.
    pub injected_noise_sigma: f64,
}

impl ScorerPool {
    pub fn new(scorers: Vec<ScorerSpec>) -> Result<Self> {
        let pool = Self {
            scorers,
            injected_noise_sigma: 0.0,
        };
        pool.validate(None)?;
        Ok(pool)
    }

    pub fn with_injected_noise(mut self, sigma: f64) -> Result<Self> {
        ensure!(sigma >= 0.0 && sigma.is_finite(), Config, "injected noise must be non-negative");
        self.injected_noise_sigma = sigma;
        Ok(self)
    }

    /// Four scorers over four categories. Scorer 0 is a decent generalist;
    /// scorer `c` is the specialist for category `c`, and every category's
    /// best scorer leads the runner-up by at least 0.4.
    pub fn default_pool() -> Self {
        let table = [
            [0.9, 0.5, 0.5, 0.5],
            [0.4, 0.9, 0.1, 0.2],
            [0.1, 0.0, 0.9, 0.3],
            [0.0, 0.2, 0.3, 0.9],
        ];
        Self {
            scorers: table
                .iter()
                .enumerate()
                .map(|(k, row)| ScorerSpec::new(format!("rm{k}"), row.to_vec(), 0.1, 0.0))
                .collect(),
            injected_noise_sigma: 0.0,
        }
    }

    /// Checks ids, noise levels and (when given) the category count.
    pub fn validate(&self, categories: Option<usize>) -> Result<()> {
        ensure!(!self.scorers.is_empty(), Config, "scorer pool is empty");
        let mut ids = HashSet::new();
        for s in &self.scorers {
            ensure!(ids.insert(s.id.as_str()), Config, "duplicate scorer id {:?}", s.id);
            ensure!(
                s.noise_sigma >= 0.0 && s.noise_sigma.is_finite(),
                Config,
                "scorer {} has invalid noise_sigma {}",
                s.id,
                s.noise_sigma
            );
            ensure!(
                s.affinity.iter().all(|a| (-1.0..=1.0).contains(a)),
                Config,
                "scorer {} has an affinity outside [-1, 1]",
                s.id
            );
            if let Some(c) = categories {
                ensure!(
                    s.affinity.len() == c,
                    Config,
                    "scorer {} defines {} affinities for {c} categories",
                    s.id,
                    s.affinity.len()
                );
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scorers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scorers.is_empty()
    }

    pub fn affinity(&self, scorer: usize, category: usize) -> f64 {
        self.scorers[scorer].affinity[category]
    }

    pub fn best_arm_for(&self, category: usize) -> usize {
        let mut best = 0;
        for k in 1..self.scorers.len() {
            if self.affinity(k, category) > self.affinity(best, category) {
                best = k;
            }
        }
        best
    }

    /// Arm with the highest mean affinity across categories.
    pub fn best_overall(&self) -> usize {
        let mean = |k: usize| self.scorers[k].affinity.iter().sum::<f64>();
        let mut best = 0;
        for k in 1..self.scorers.len() {
            if mean(k) > mean(best) {
                best = k;
            }
        }
        best
    }

    /// Score of `query.universe[response]` by scorer `k`, including any
    /// injected noise.
    pub fn score(&self, k: usize, query: &Query, response: usize, seed: u64) -> Result<f64> {
        let scorer = &self.scorers[k];
        let r = query
            .universe
            .get(response)
            .ok_or_else(|| Error::Contract(format!("response {response} not in query {}", query.id)))?;
        let mut rng = scorer.noise_stream(seed, query, r);
        score_with_extra_noise(scorer, query, r, self.injected_noise_sigma, &mut rng)
    }
}

/// Memoized scores for one run: `(scorer, query id, response)` → score.
///
/// Values are exactly what [`ScorerPool::score`] returns; the cache only
/// avoids re-keying a stream for every repeated lookup.
#[derive(Debug, Clone)]
pub struct ScoreCache {
    seed: u64,
    universe: usize,
    queries: usize,
    values: Vec<f64>,
}

impl ScoreCache {
    pub fn new(seed: u64, pool: &ScorerPool, num_queries: usize, universe: usize) -> Self {
        Self {
            seed,
            universe,
            queries: num_queries,
            values: vec![f64::NAN; pool.len() * num_queries * universe],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&mut self, pool: &ScorerPool, k: usize, query: &Query, response: usize) -> Result<f64> {
        if query.id >= self.queries || response >= self.universe {
            return pool.score(k, query, response, self.seed);
        }
        let slot = (k * self.queries + query.id) * self.universe + response;
        let v = self.values[slot];
        if !v.is_nan() {
            return Ok(v);
        }
        let v = pool.score(k, query, response, self.seed)?;
        self.values[slot] = v;
        Ok(v)
    }
}

/// Stable descending sort of positions by score; ties keep input order.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Ranks `responses` (indices into the query's universe) by one scorer.
pub fn rank_responses(
    pool: &ScorerPool,
    scorer: usize,
    query: &Query,
    responses: &[usize],
    seed: u64,
) -> Result<Vec<usize>> {
    ensure!(!responses.is_empty(), Contract, "nothing to rank");
    let scores = responses
        .iter()
        .map(|&r| pool.score(scorer, query, r, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_scores(&scores))
}

/// F1 of `candidate` against `reference`, with "first response preferred"
/// (`true`) as the positive class. Zero when precision + recall is zero.
pub fn pairwise_agreement_f1(reference: &[bool], candidate: &[bool]) -> Result<f64> {
    ensure!(
        !reference.is_empty() && reference.len() == candidate.len(),
        Contract,
        "preference lists must be non-empty and equal length ({} vs {})",
        reference.len(),
        candidate.len()
    );
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&r, &c) in reference.iter().zip(candidate) {
        match (r, c) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        // Covers the all-negative case where both lists agree on nothing positive.
        return Ok(if fp == 0 && fn_ == 0 { 1.0 } else { 0.0 });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Binary preferences of scorer `k` over every unordered candidate pair
/// `(i, j)`, `i < j`, of each query: `true` when `i` scores strictly higher.
pub fn pairwise_preferences(pool: &ScorerPool, k: usize, queries: &[Query], seed: u64) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for q in queries {
        let scores = (0..q.universe.len())
            .map(|r| pool.score(k, q, r, seed))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..scores.len() {
            for j in i + 1..scores.len() {
                out.push(scores[i] > scores[j]);
            }
        }
    }
    Ok(out)
}

/// `m[a][b]` = F1 of scorer `b`'s preferences against reference scorer `a`.
pub fn agreement_matrix(pool: &ScorerPool, queries: &[Query], seed: u64) -> Result<Vec<Vec<f64>>> {
    let prefs = (0..pool.len())
        .map(|k| pairwise_preferences(pool, k, queries, seed))
        .collect::<Result<Vec<_>>>()?;
    prefs
        .iter()
        .map(|a| prefs.iter().map(|b| pairwise_agreement_f1(a, b)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_environment, EnvironmentConfig};

    fn env() -> crate::env::Environment {
        generate_environment(&EnvironmentConfig {
            queries_per_category: 10,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn noiseless_unit_affinity_returns_gold() {
        let env = env();
        let pool = ScorerPool::new(vec![ScorerSpec::new("a", vec![1.0; 4], 0.0, 0.0)]).unwrap();
        for q in &env.train[..5] {
            for (r, cand) in q.universe.iter().enumerate() {
                assert_eq!(pool.score(0, q, r, 1).unwrap(), cand.gold_quality);
            }
        }
    }

    #[test]
    fn negative_affinity_reverses_rankings() {
        let env = env();
        let pool = ScorerPool::new(vec![
            ScorerSpec::new("good", vec![1.0; 4], 0.0, 0.0),
            ScorerSpec::new("bad", vec![-1.0; 4], 0.0, 0.0),
        ])
        .unwrap();
        for q in &env.train[..5] {
            for i in 0..q.universe.len() {
                for j in 0..q.universe.len() {
                    let g = pool.score(0, q, i, 0).unwrap() > pool.score(0, q, j, 0).unwrap();
                    let b = pool.score(1, q, i, 0).unwrap() < pool.score(1, q, j, 0).unwrap();
                    assert_eq!(g, b);
                }
            }
        }
    }

    #[test]
    fn noisy_scores_are_reproducible() {
        let env = env();
        let pool = ScorerPool::new(vec![ScorerSpec::new("n", vec![0.8; 4], 0.1, 0.3)]).unwrap();
        let q = &env.train[0];
        let a = pool.score(0, q, 3, 42).unwrap();
        assert_eq!(a, pool.score(0, q, 3, 42).unwrap());
        let mut rng = pool.scorers[0].noise_stream(42, q, &q.universe[3]);
        assert_eq!(a, score(&pool.scorers[0], q, &q.universe[3], &mut rng).unwrap());
        assert_ne!(a, pool.score(0, q, 3, 43).unwrap());
    }

    #[test]
    fn affine_in_gold_without_noise() {
        let env = env();
        let pool = ScorerPool::new(vec![ScorerSpec::new("s", vec![0.3, -0.5, 0.7, 0.0], 0.0, 1.25)]).unwrap();
        for q in &env.train[..8] {
            let a = pool.affinity(0, q.category);
            for (r, cand) in q.universe.iter().enumerate() {
                assert_eq!(pool.score(0, q, r, 9).unwrap(), a * cand.gold_quality + 1.25);
            }
        }
    }

    #[test]
    fn unknown_category_is_a_config_error() {
        let env = env();
        let scorer = ScorerSpec::new("short", vec![1.0], 0.0, 0.0);
        let q = env.train.iter().find(|q| q.category > 0).unwrap();
        let mut rng = scorer.noise_stream(0, q, &q.universe[0]);
        assert!(matches!(score(&scorer, q, &q.universe[0], &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn pool_validation() {
        assert!(ScorerPool::new(vec![]).is_err());
        let dup = vec![
            ScorerSpec::new("a", vec![0.1], 0.0, 0.0),
            ScorerSpec::new("a", vec![0.2], 0.0, 0.0),
        ];
        assert!(ScorerPool::new(dup).is_err());
        assert!(ScorerPool::new(vec![ScorerSpec::new("a", vec![0.1], -1.0, 0.0)]).is_err());
        assert!(ScorerPool::default_pool().validate(Some(4)).is_ok());
        assert!(ScorerPool::default_pool().validate(Some(3)).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_by_scores(&[3.0, 1.0, 2.0]), vec![0, 2, 1]);
        assert_eq!(rank_by_scores(&[1.0; 5]), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn noiseless_ranking_matches_gold_sort() {
        let env = env();
        let pool = ScorerPool::new(vec![ScorerSpec::new("a", vec![1.0; 4], 0.0, 0.0)]).unwrap();
        let q = &env.train[2];
        let responses: Vec<usize> = (0..q.universe.len()).collect();
        let ranked = rank_responses(&pool, 0, q, &responses, 0).unwrap();
        let mut gold = responses.clone();
        gold.sort_by(|&a, &b| q.universe[b].gold_quality.partial_cmp(&q.universe[a].gold_quality).unwrap());
        assert_eq!(ranked, gold);
    }

    #[test]
    fn f1_examples() {
        let x = [true, false, true, true];
        assert_eq!(pairwise_agreement_f1(&x, &x).unwrap(), 1.0);
        let f1 = pairwise_agreement_f1(&[true, true, false, false], &[true, false, false, true]).unwrap();
        assert!((f1 - 0.5).abs() < 1e-15);
        assert_eq!(pairwise_agreement_f1(&[true, false], &[false, true]).unwrap(), 0.0);
        assert!(pairwise_agreement_f1(&[true], &[true, false]).is_err());
        assert!(pairwise_agreement_f1(&[], &[]).is_err());
    }

    #[test]
    fn aligned_scorers_agree_more_than_opposed_ones() {
        let env = env();
        let pool = ScorerPool::new(vec![
            ScorerSpec::new("a", vec![0.9; 4], 0.1, 0.0),
            ScorerSpec::new("b", vec![0.8; 4], 0.1, 0.0),
            ScorerSpec::new("c", vec![-0.4; 4], 0.1, 0.0),
        ])
        .unwrap();
        let m = agreement_matrix(&pool, &env.train, 3).unwrap();
        assert_eq!(m[0][0], 1.0);
        assert!(m[0][1] > m[0][2] + 0.3, "{m:?}");
        assert!(m[1][0] == m[0][1] && m[1][2] < m[0][1], "{m:?}");
    }

    #[test]
    fn cache_matches_direct_scoring() {
        let env = env();
        let pool = ScorerPool::default_pool();
        let mut cache = ScoreCache::new(5, &pool, env.num_queries(), env.config.universe_size);
        for q in &env.test {
            for k in 0..pool.len() {
                for r in [0, 7, 15] {
                    let direct = pool.score(k, q, r, 5).unwrap();
                    assert_eq!(cache.get(&pool, k, q, r).unwrap(), direct);
                    assert_eq!(cache.get(&pool, k, q, r).unwrap(), direct);
                }
            }
        }
    }
}
