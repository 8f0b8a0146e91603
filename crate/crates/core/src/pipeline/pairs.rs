use rand::seq::index;

use crate::env::Query;
use crate::error::{ensure, Result};
use crate::numerics::{zscore, RngStream};
use crate::policy::{PairSource, PreferencePair};

/// Samples up to `p` distinct ordered pairs `(i, j)` with `scores[i] > scores[j]`.
///
/// `responses[i]` is the universe index of the i-th sampled response and
/// `scores[i]` its score. Returns every strictly ordered pair when fewer than
/// `p` exist, and an empty list when all scores tie.
pub fn build_preference_pairs<'a>(
    query: &'a Query,
    responses: &[usize],
    scores: &[f64],
    p: usize,
    source: PairSource,
    rng: &mut RngStream,
) -> Result<Vec<PreferencePair<'a>>> {
    ensure!(
        responses.len() == scores.len(),
        Contract,
        "{} responses but {} scores",
        responses.len(),
        scores.len()
    );
    ensure!(responses.len() >= 2, Contract, "need at least two responses to form a pair");
    let mut ordered = Vec::new();
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if scores[i] > scores[j] {
                ordered.push((i, j));
            }
        }
    }
    let picks: Vec<usize> = if ordered.len() <= p {
        (0..ordered.len()).collect()
    } else {
        index::sample(rng, ordered.len(), p).into_vec()
    };
    picks
        .into_iter()
        .map(|idx| {
            let (i, j) = ordered[idx];
            PreferencePair::new(query, responses[i], responses[j], source, scores[i], scores[j])
        })
        .collect()
}

/// Per-response ensemble score: the weighted mean over scorers, after
/// optional per-scorer standardization across the responses.
///
/// `scores[k][i]` is scorer `k`'s score for response `i`.
pub fn ensemble_scores(scores: &[Vec<f64>], weights: &[f64], z_normalize: bool) -> Result<Vec<f64>> {
    ensure!(!scores.is_empty(), Contract, "no scorer scores to ensemble");
    ensure!(
        weights.len() == scores.len(),
        Contract,
        "{} weights for {} scorers",
        weights.len(),
        scores.len()
    );
    let n = scores[0].len();
    ensure!(scores.iter().all(|s| s.len() == n), Contract, "scorers scored different response sets");
    let total: f64 = weights.iter().sum();
    ensure!(total > 0.0, Contract, "ensemble weights sum to zero");
    let mut out = vec![0.0; n];
    for (row, w) in scores.iter().zip(weights) {
        let row = if z_normalize { zscore(row) } else { row.clone() };
        for (o, s) in out.iter_mut().zip(&row) {
            *o += w / total * s;
        }
    }
    Ok(out)
}

/// Pairs ordered by the arithmetic mean of all scorers.
pub fn score_ensemble_pairs<'a>(
    query: &'a Query,
    responses: &[usize],
    scores: &[Vec<f64>],
    p: usize,
    z_normalize: bool,
    rng: &mut RngStream,
) -> Result<Vec<PreferencePair<'a>>> {
    let uniform = vec![1.0; scores.len()];
    let mean = ensemble_scores(scores, &uniform, z_normalize)?;
    build_preference_pairs(query, responses, &mean, p, PairSource::ScoreEnsemble, rng)
}

/// A candidate pair after majority voting, kept for inspection in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VotedPair {
    /// Positions in the response list.
    pub winner: usize,
    pub loser: usize,
    /// Scorers preferring the winner.
    pub votes: usize,
    /// Position in the candidate sample (ties are broken by it).
    pub sample_order: usize,
}

/// Samples `candidates` unordered pairs (all of them if fewer exist), orients
/// each by strict majority vote, and returns them sorted by descending vote
/// count, ties by sample order. Pairs without a strict majority are dropped.
pub fn vote_candidate_pairs(scores: &[Vec<f64>], candidates: usize, rng: &mut RngStream) -> Result<Vec<VotedPair>> {
    ensure!(!scores.is_empty(), Contract, "no scorer scores to vote with");
    let n = scores[0].len();
    ensure!(n >= 2, Contract, "need at least two responses to form a pair");
    ensure!(scores.iter().all(|s| s.len() == n), Contract, "scorers scored different response sets");
    let k = scores.len();
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            all.push((i, j));
        }
    }
    let sampled: Vec<(usize, usize)> = if all.len() <= candidates {
        all
    } else {
        index::sample(rng, all.len(), candidates)
            .into_iter()
            .map(|idx| all[idx])
            .collect()
    };
    let mut voted = Vec::with_capacity(sampled.len());
    for (order, (i, j)) in sampled.into_iter().enumerate() {
        let up = scores.iter().filter(|s| s[i] > s[j]).count();
        let down = scores.iter().filter(|s| s[j] > s[i]).count();
        let (winner, loser, votes) = if 2 * up > k {
            (i, j, up)
        } else if 2 * down > k {
            (j, i, down)
        } else {
            continue;
        };
        voted.push(VotedPair {
            winner,
            loser,
            votes,
            sample_order: order,
        });
    }
    voted.sort_by(|a, b| b.votes.cmp(&a.votes).then(a.sample_order.cmp(&b.sample_order)));
    Ok(voted)
}

/// The `keep` candidate pairs with the highest cross-scorer agreement.
///
/// A pair's `winner_score`/`loser_score` are the vote counts for each side.
pub fn agreement_ensemble_pairs<'a>(
    query: &'a Query,
    responses: &[usize],
    scores: &[Vec<f64>],
    candidates: usize,
    keep: usize,
    rng: &mut RngStream,
) -> Result<Vec<PreferencePair<'a>>> {
    let k = scores.len();
    vote_candidate_pairs(scores, candidates, rng)?
        .into_iter()
        .take(keep)
        .map(|v| {
            let against = scores.iter().filter(|s| s[v.loser] > s[v.winner]).count();
            debug_assert!(against < v.votes && against + v.votes <= k);
            PreferencePair::new(
                query,
                responses[v.winner],
                responses[v.loser],
                PairSource::AgreementEnsemble,
                v.votes as f64,
                against as f64,
            )
        })
        .collect()
}
