//! Linear-softmax policy over each query's finite response universe.
//!
//! `π(y|x) ∝ exp(θ·φ(x, y))` with `φ(x, y)` the candidate's feature vector.
//! Log-probabilities, both preference losses and their gradients are exact.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Query;
use crate::error::{ensure, Error, Result};
use crate::numerics::{log_sigmoid, log_softmax, sigmoid, softmax, RngStream, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vector,
}

/// Frozen copy of the policy taken at the start of an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSnapshot {
    pub theta_ref: Vector,
}

impl PolicyParams {
    pub fn new(theta: Vector) -> Self {
        Self { theta }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(Vector::zeros(dim))
    }

    pub fn feature_dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn snapshot(&self) -> ReferenceSnapshot {
        ReferenceSnapshot {
            theta_ref: self.theta.clone(),
        }
    }

    /// `θ·φ(x, y)` for every candidate of `query`.
    pub fn logits(&self, query: &Query) -> Result<Vec<f64>> {
        logits(&self.theta, query)
    }

    pub fn log_probs(&self, query: &Query) -> Result<Vector> {
        log_softmax(&self.logits(query)?, 1.0)
    }
}

fn logits(theta: &Vector, query: &Query) -> Result<Vec<f64>> {
    query
        .universe
        .iter()
        .map(|r| {
            ensure!(
                r.features.dim() == theta.dim(),
                Contract,
                "response features have dimension {}, policy has {}",
                r.features.dim(),
                theta.dim()
            );
            Ok(theta.dot(&r.features))
        })
        .collect()
}

/// `log π(y|x)` for `y = query.universe[response]`.
pub fn logprob(params: &PolicyParams, query: &Query, response: usize) -> Result<f64> {
    ensure!(
        response < query.universe.len(),
        Contract,
        "response {response} is not in the universe of query {}",
        query.id
    );
    Ok(params.log_probs(query)?[response])
}

/// `n` independent draws (indices into the universe) from `softmax(θ·φ/τ)`.
pub fn sample_responses(
    params: &PolicyParams,
    query: &Query,
    n: usize,
    temperature: f64,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    ensure!(!query.universe.is_empty(), Contract, "query {} has an empty universe", query.id);
    let probs = softmax(&params.logits(query)?, temperature)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs.iter() {
        acc += p;
        cdf.push(acc);
    }
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
        })
        .collect())
}

/// Where a preference pair's ordering came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSource {
    Scorer(usize),
    ScoreEnsemble,
    AgreementEnsemble,
    OnlineEnsemble,
    Gold,
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSource::Scorer(k) => write!(f, "scorer:{k}"),
            PairSource::ScoreEnsemble => f.write_str("score_ensemble"),
            PairSource::AgreementEnsemble => f.write_str("agreement_ensemble"),
            PairSource::OnlineEnsemble => f.write_str("online_ensemble"),
            PairSource::Gold => f.write_str("gold"),
        }
    }
}

/// A `(query, winner, loser)` triple with the scores that ordered it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair<'a> {
    pub query: &'a Query,
    /// Index into `query.universe`.
    pub winner: usize,
    pub loser: usize,
    pub source: PairSource,
    pub winner_score: f64,
    pub loser_score: f64,
}

impl<'a> PreferencePair<'a> {
    pub fn new(
        query: &'a Query,
        winner: usize,
        loser: usize,
        source: PairSource,
        winner_score: f64,
        loser_score: f64,
    ) -> Result<Self> {
        ensure!(
            winner_score > loser_score,
            Contract,
            "winner score {winner_score} does not exceed loser score {loser_score}"
        );
        ensure!(
            winner < query.universe.len() && loser < query.universe.len(),
            Contract,
            "pair refers to responses outside the universe of query {}",
            query.id
        );
        Ok(Self {
            query,
            winner,
            loser,
            source,
            winner_score,
            loser_score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    #[default]
    Dpo,
    DpoPlusNll,
    Nll,
}

impl LossMode {
    fn has_dpo(self) -> bool {
        matches!(self, LossMode::Dpo | LossMode::DpoPlusNll)
    }

    fn has_nll(self) -> bool {
        matches!(self, LossMode::Nll | LossMode::DpoPlusNll)
    }
}

/// Per-pair quantities shared by the losses and their gradients.
struct PairEval {
    /// `(log π(w) − log π_ref(w)) − (log π(l) − log π_ref(l))`.
    margin: f64,
    /// `E_π[φ]` over the query's universe.
    expected_features: Vec<f64>,
}

fn eval_pair(params: &PolicyParams, reference: Option<&ReferenceSnapshot>, pair: &PreferencePair) -> Result<PairEval> {
    let q = pair.query;
    let lp = params.log_probs(q)?;
    let margin = match reference {
        Some(r) => {
            let lr = log_softmax(&logits(&r.theta_ref, q)?, 1.0)?;
            (lp[pair.winner] - lr[pair.winner]) - (lp[pair.loser] - lr[pair.loser])
        }
        None => 0.0,
    };
    let mut expected = vec![0.0; params.feature_dim()];
    for (l, r) in lp.iter().zip(&q.universe) {
        let p = l.exp();
        expected.iter_mut().zip(r.features.iter()).for_each(|(e, f)| *e += p * f);
    }
    Ok(PairEval {
        margin,
        expected_features: expected,
    })
}

fn length_of(pair: &PreferencePair) -> Result<f64> {
    let len = pair.query.universe[pair.winner].length;
    ensure!(len > 0, Contract, "winner length must be positive");
    Ok(f64::from(len))
}

/// Mean of `−log σ(β·margin)` over the pairs.
pub fn dpo_loss(params: &PolicyParams, reference: &ReferenceSnapshot, pairs: &[PreferencePair], beta: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    ensure!(beta >= 0.0, Domain, "beta must be non-negative, got {beta}");
    let mut total = 0.0;
    for pair in pairs {
        let e = eval_pair(params, Some(reference), pair)?;
        total -= log_sigmoid(beta * e.margin);
    }
    Ok(total / pairs.len() as f64)
}

/// Mean of `−log π(y_w|x) / |y_w|` over the pairs.
pub fn nll_loss(params: &PolicyParams, pairs: &[PreferencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for pair in pairs {
        let len = length_of(pair)?;
        total -= logprob(params, pair.query, pair.winner)? / len;
    }
    Ok(total / pairs.len() as f64)
}

pub fn combined_loss(
    params: &PolicyParams,
    reference: &ReferenceSnapshot,
    pairs: &[PreferencePair],
    beta: f64,
    mode: LossMode,
) -> Result<f64> {
    match mode {
        LossMode::Dpo => dpo_loss(params, reference, pairs, beta),
        LossMode::Nll => nll_loss(params, pairs),
        LossMode::DpoPlusNll => Ok(dpo_loss(params, reference, pairs, beta)? + nll_loss(params, pairs)?),
    }
}

/// Exact gradient of [`combined_loss`] with respect to `θ`.
///
/// The DPO margin's log-normalizers cancel between winner and loser, so
/// `∂margin/∂θ = φ_w − φ_l`; the NLL term contributes `−(φ_w − E_π[φ])/|y_w|`.
pub fn loss_gradient(
    params: &PolicyParams,
    reference: &ReferenceSnapshot,
    pairs: &[PreferencePair],
    beta: f64,
    mode: LossMode,
) -> Result<Vector> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    ensure!(beta >= 0.0, Domain, "beta must be non-negative, got {beta}");
    let n = pairs.len() as f64;
    let mut grad = Vector::zeros(params.feature_dim());
    for pair in pairs {
        let e = eval_pair(params, Some(reference), pair)?;
        let fw = &pair.query.universe[pair.winner].features;
        let fl = &pair.query.universe[pair.loser].features;
        if mode.has_dpo() {
            let coef = -beta * sigmoid(-beta * e.margin) / n;
            for i in 0..grad.dim() {
                grad[i] += coef * (fw[i] - fl[i]);
            }
        }
        if mode.has_nll() {
            let coef = -1.0 / (length_of(pair)? * n);
            for i in 0..grad.dim() {
                grad[i] += coef * (fw[i] - e.expected_features[i]);
            }
        }
    }
    Ok(grad)
}

/// `θ ← θ − lr·∇`.
pub fn sgd_step(params: &PolicyParams, gradient: &[f64], learning_rate: f64) -> Result<PolicyParams> {
    ensure!(
        learning_rate > 0.0 && learning_rate.is_finite(),
        Domain,
        "learning rate must be positive, got {learning_rate}"
    );
    ensure!(
        gradient.len() == params.feature_dim(),
        Contract,
        "gradient has dimension {}, policy has {}",
        gradient.len(),
        params.feature_dim()
    );
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "gradient component {i} is {} (|θ| = {:.3e})",
            gradient[i],
            params.theta.norm()
        )));
    }
    let mut theta = params.theta.clone();
    theta.axpy(-learning_rate, gradient);
    Ok(PolicyParams { theta })
}

/// Mean held-out margin `log π(y_w|x) − log π(y_l|x)` over every
/// gold-ordered candidate pair of each query.
pub fn mean_gold_margin(params: &PolicyParams, queries: &[Query]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for q in queries {
        let lp = params.log_probs(q)?;
        for i in 0..q.universe.len() {
            for j in 0..q.universe.len() {
                if q.universe[i].gold_quality > q.universe[j].gold_quality {
                    total += lp[i] - lp[j];
                    count += 1;
                }
            }
        }
    }
    ensure!(count > 0, Contract, "no gold-ordered pairs to evaluate");
    Ok(total / count as f64)
}
