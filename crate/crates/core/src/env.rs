//! Synthetic task generator and gold-quality oracle.
//!
//! Queries belong to one of `C` categories and carry unit-norm features
//! clustered around an orthogonal per-category centroid, so a batch drawn
//! from one category has a context that identifies it. Each query owns a
//! finite universe of candidate responses whose gold quality is a fixed
//! linear function of the response features.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{softmax, RngStream, Vector};
use crate::pipeline::TrainTrace;
use crate::policy::PolicyParams;
use crate::scorers::ScorerPool;

pub const DATASET_FORMAT: &str = "rmbandit-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCandidate {
    pub id: usize,
    pub features: Vector,
    pub gold_quality: f64,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    /// Unique across all splits of one environment.
    pub id: usize,
    pub category: usize,
    pub features: Vector,
    pub universe: Vec<ResponseCandidate>,
}

impl Query {
    /// Index of the highest-gold response (lowest index on ties).
    pub fn gold_best(&self) -> usize {
        argmax_by(&self.universe, |r| r.gold_quality)
    }

    pub fn gold_worst(&self) -> usize {
        argmax_by(&self.universe, |r| -r.gold_quality)
    }
}

fn argmax_by<T>(items: &[T], key: impl Fn(&T) -> f64) -> usize {
    let mut best = 0;
    for i in 1..items.len() {
        if key(&items[i]) > key(&items[best]) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    pub categories: usize,
    pub queries_per_category: usize,
    /// Query feature (and bandit context) dimension.
    pub context_dim: usize,
    /// Response feature dimension, which is also the policy dimension.
    pub response_dim: usize,
    pub universe_size: usize,
    /// Standard deviation of gold quality across a query's candidates.
    pub gold_std: f64,
    /// Per-coordinate jitter added to the category centroid before renormalizing.
    pub centroid_jitter: f64,
    /// Responses get a length drawn uniformly from `1..=max_length`.
    pub max_length: u32,
    /// Train/dev/test fractions; must sum to one.
    pub split: [f64; 3],
    /// Seed for the sampled queries and responses.
    pub seed: u64,
    /// Seed for centroids and the gold direction. Environments sharing it
    /// share category geometry, which is what makes a bandit transferable.
    pub structure_seed: u64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            categories: 4,
            queries_per_category: 143,
            context_dim: 8,
            response_dim: 8,
            universe_size: 16,
            gold_std: 0.2,
            centroid_jitter: 0.15,
            max_length: 1,
            split: [0.7, 0.1, 0.2],
            seed: 0,
            structure_seed: 0,
        }
    }
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.categories >= 1, Config, "need at least one category");
        ensure!(self.queries_per_category >= 1, Config, "need at least one query per category");
        ensure!(self.context_dim >= 1 && self.response_dim >= 1, Config, "dimensions must be positive");
        ensure!(self.universe_size >= 2, Config, "universe size must be at least 2");
        ensure!(self.gold_std > 0.0 && self.gold_std.is_finite(), Config, "gold_std must be positive");
        ensure!(self.centroid_jitter >= 0.0, Config, "centroid_jitter must be non-negative");
        ensure!(self.max_length >= 1, Config, "max_length must be at least 1");
        ensure!(
            self.split.iter().all(|r| *r >= 0.0),
            Config,
            "split ratios must be non-negative"
        );
        let total: f64 = self.split.iter().sum();
        ensure!(
            (total - 1.0).abs() <= 1e-9,
            Config,
            "split ratios sum to {total}, expected 1"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub config: EnvironmentConfig,
    pub centroids: Vec<Vector>,
    /// Unit vector `w` with `gold = gold_std · w·φ(y)`.
    pub gold_direction: Vector,
    pub train: Vec<Query>,
    pub dev: Vec<Query>,
    pub test: Vec<Query>,
}

fn gaussian_vector(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vector {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v.into()
}

/// Gram–Schmidt over Gaussian draws while `count ≤ dim`; beyond that the
/// extra centroids are plain random unit vectors.
fn centroids(count: usize, dim: usize, rng: &mut RngStream) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian_vector(dim, rng);
        if out.len() < dim {
            for c in &out {
                let proj = c.dot(&v);
                v.iter_mut().zip(c.iter()).for_each(|(x, y)| *x -= proj * y);
            }
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6 {
                continue;
            }
        }
        out.push(unit(v));
    }
    out
}

/// Builds the train/dev/test query sets. Pure in `config`.
pub fn generate_environment(config: &EnvironmentConfig) -> Result<Environment> {
    config.validate()?;
    let mut structure = RngStream::new(config.structure_seed, "env/structure");
    let centroids = centroids(config.categories, config.context_dim, &mut structure);
    let gold_direction = unit(gaussian_vector(config.response_dim, &mut structure));

    let mut rng = RngStream::new(config.seed, "env/queries");
    let mut queries = Vec::with_capacity(config.categories * config.queries_per_category);
    for (category, centroid) in centroids.iter().enumerate() {
        for _ in 0..config.queries_per_category {
            let mut f = gaussian_vector(config.context_dim, &mut rng);
            f.iter_mut()
                .zip(centroid.iter())
                .for_each(|(x, c)| *x = c + config.centroid_jitter * *x);
            let universe = (0..config.universe_size)
                .map(|id| {
                    let features: Vector = gaussian_vector(config.response_dim, &mut rng).into();
                    let gold_quality = config.gold_std * gold_direction.dot(&features);
                    let length = rng.random_range(1..=config.max_length);
                    ResponseCandidate {
                        id,
                        features,
                        gold_quality,
                        length,
                    }
                })
                .collect();
            queries.push(Query {
                id: 0,
                category,
                features: unit(f),
                universe,
            });
        }
    }
    queries.shuffle(&mut rng);
    for (id, q) in queries.iter_mut().enumerate() {
        q.id = id;
    }

    let (n_train, n_dev) = split_sizes(queries.len(), config.split);
    let test = queries.split_off(n_train + n_dev);
    let dev = queries.split_off(n_train);
    Ok(Environment {
        config: config.clone(),
        centroids,
        gold_direction,
        train: queries,
        dev,
        test,
    })
}

/// `(train, dev)` sizes; test takes the remainder.
pub fn split_sizes(total: usize, split: [f64; 3]) -> (usize, usize) {
    let train = ((total as f64) * split[0]).round() as usize;
    let dev = (((total as f64) * split[1]).round() as usize).min(total - train.min(total));
    (train.min(total), dev)
}

impl Environment {
    pub fn num_categories(&self) -> usize {
        self.config.categories
    }

    pub fn queries(&self) -> impl Iterator<Item = &Query> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }

    pub fn num_queries(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format: &'a str,
            version: u32,
            environment: &'a Environment,
        }
        let doc = Doc {
            format: DATASET_FORMAT,
            version: DATASET_VERSION,
            environment: self,
        };
        fs::write(path, serde_json::to_string(&doc)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            format: String,
            version: u32,
            environment: Environment,
        }
        let fail = |message: String| Error::Load {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let doc: Doc = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        if doc.format != DATASET_FORMAT || doc.version != DATASET_VERSION {
            return Err(fail(format!(
                "unsupported dataset {} v{} (expected {DATASET_FORMAT} v{DATASET_VERSION})",
                doc.format, doc.version
            )));
        }
        Ok(doc.environment)
    }
}

/// Scorer with the highest affinity for the query's category; ties to the
/// lowest index.
pub fn gold_best_arm(query: &Query, pool: &ScorerPool) -> usize {
    pool.best_arm_for(query.category)
}

/// Running sum of per-step regret, where a step's regret is the batch-average
/// gap between the oracle scorer's affinity and the affinity the strategy
/// actually used (weighted by its arm weights).
pub fn cumulative_regret(trace: &TrainTrace, env: &Environment, pool: &ScorerPool) -> Result<Vec<f64>> {
    ensure!(
        trace.num_categories == env.num_categories() && trace.num_arms == pool.len(),
        Contract,
        "trace shape ({} categories, {} arms) does not match env/pool ({}, {})",
        trace.num_categories,
        trace.num_arms,
        env.num_categories(),
        pool.len()
    );
    let mut total = 0.0;
    let mut curve = Vec::with_capacity(trace.records.len());
    for rec in &trace.records {
        total += step_regret(&rec.category_counts, &rec.arm_weights, pool);
        curve.push(total);
    }
    Ok(curve)
}

pub(crate) fn step_regret(category_counts: &[usize], arm_weights: &[f64], pool: &ScorerPool) -> f64 {
    let n: usize = category_counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut regret = 0.0;
    for (c, &count) in category_counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let best = pool.affinity(pool.best_arm_for(c), c);
        let used: f64 = arm_weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * pool.affinity(k, c))
            .sum();
        regret += count as f64 * (best - used).max(0.0);
    }
    regret / n as f64
}

/// Per-category arm selection frequencies over the trailing `window` steps
/// (all steps when `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    /// `frequencies[c][k]`; each row sums to one, or is all zeros when the
    /// category never appeared in the window.
    pub frequencies: Vec<Vec<f64>>,
    /// Queries of each category seen in the window.
    pub counts: Vec<usize>,
}

impl UtilizationReport {
    /// Most-used arm per category (`None` for unseen categories).
    pub fn modal_arms(&self) -> Vec<Option<usize>> {
        self.frequencies
            .iter()
            .zip(&self.counts)
            .map(|(row, &n)| (n > 0).then(|| argmax_by(row, |x| *x)))
            .collect()
    }
}

pub fn utilization_report(trace: &TrainTrace, window: Option<usize>) -> UtilizationReport {
    let records = &trace.records;
    let start = window.map_or(0, |w| records.len().saturating_sub(w));
    let mut mass = vec![vec![0.0; trace.num_arms]; trace.num_categories];
    let mut counts = vec![0usize; trace.num_categories];
    for rec in &records[start..] {
        for (c, &n) in rec.category_counts.iter().enumerate() {
            counts[c] += n;
            for (k, w) in rec.arm_weights.iter().enumerate() {
                mass[c][k] += n as f64 * w;
            }
        }
    }
    for row in &mut mass {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        }
    }
    UtilizationReport {
        frequencies: mass,
        counts,
    }
}

/// Gold quality of the policy's response distribution at `temperature`,
/// min–max normalized within each query's universe (0 = worst candidate,
/// 1 = best), averaged over `queries`.
pub fn mean_gold_quality(params: &PolicyParams, queries: &[Query], temperature: f64) -> Result<f64> {
    ensure!(!queries.is_empty(), Contract, "no queries to evaluate");
    let mut total = 0.0;
    for q in queries {
        let logits = params.logits(q)?;
        let probs = softmax(&logits, temperature)?;
        let expected: f64 = probs
            .iter()
            .zip(&q.universe)
            .map(|(p, r)| p * normalized_gold(q, r.gold_quality))
            .sum();
        total += expected;
    }
    Ok(total / queries.len() as f64)
}

/// Gold quality rescaled to `[0, 1]` within the query's universe.
pub fn normalized_gold(query: &Query, gold: f64) -> f64 {
    let lo = query.universe[query.gold_worst()].gold_quality;
    let hi = query.universe[query.gold_best()].gold_quality;
    if hi > lo {
        (gold - lo) / (hi - lo)
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> EnvironmentConfig {
        EnvironmentConfig {
            queries_per_category: 25,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn split_sizes_follow_ratios() {
        assert_eq!(split_sizes(100, [0.7, 0.1, 0.2]), (70, 10));
        let env = generate_environment(&small(1)).unwrap();
        assert_eq!((env.train.len(), env.dev.len(), env.test.len()), (70, 10, 20));
        let default = generate_environment(&EnvironmentConfig::default()).unwrap();
        assert_eq!(default.train.len(), 400);
    }

    #[test]
    fn splits_are_disjoint_and_ids_unique() {
        let env = generate_environment(&small(2)).unwrap();
        let mut ids: Vec<usize> = env.queries().map(|q| q.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), env.num_queries());
    }

    #[test]
    fn same_seed_same_dataset() {
        assert_eq!(generate_environment(&small(3)).unwrap(), generate_environment(&small(3)).unwrap());
        assert_ne!(
            generate_environment(&small(3)).unwrap().train,
            generate_environment(&small(4)).unwrap().train
        );
    }

    #[test]
    fn structure_seed_fixes_geometry() {
        let a = generate_environment(&small(3)).unwrap();
        let b = generate_environment(&small(9)).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.gold_direction, b.gold_direction);
    }

    #[test]
    fn bad_split_is_rejected() {
        let cfg = EnvironmentConfig {
            split: [0.7, 0.2, 0.2],
            ..small(0)
        };
        assert!(matches!(generate_environment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn query_features_are_unit_norm() {
        let env = generate_environment(&small(5)).unwrap();
        for q in env.queries() {
            assert!((q.features.norm() - 1.0).abs() < 1e-12);
            assert!(q.universe.len() >= 2);
        }
    }

    #[test]
    fn centroid_cosines_are_small() {
        // Independent geometry check: pairwise cosine of per-category mean features.
        let env = generate_environment(&small(6)).unwrap();
        let c = env.num_categories();
        let d = env.config.context_dim;
        let mut means = vec![vec![0.0; d]; c];
        for q in env.queries() {
            for (m, x) in means[q.category].iter_mut().zip(q.features.iter()) {
                *m += x;
            }
        }
        for i in 0..c {
            for j in i + 1..c {
                let dot: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| a * b).sum();
                let ni = means[i].iter().map(|x| x * x).sum::<f64>().sqrt();
                let nj = means[j].iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(dot / (ni * nj) < 0.5, "categories {i},{j}");
            }
        }
    }

    #[test]
    fn lengths_respect_bounds() {
        let cfg = EnvironmentConfig {
            max_length: 4,
            ..small(7)
        };
        let env = generate_environment(&cfg).unwrap();
        let lengths: Vec<u32> = env.queries().flat_map(|q| q.universe.iter().map(|r| r.length)).collect();
        assert!(lengths.iter().all(|l| (1..=4).contains(l)));
        assert!(lengths.contains(&4));
    }
}
