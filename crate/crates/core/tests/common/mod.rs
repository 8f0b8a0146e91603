//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rmbandit::env::{generate_environment, Environment, EnvironmentConfig, Query};
use rmbandit::numerics::RngStream;
use rmbandit::policy::{combined_loss, LossMode, PairSource, PolicyParams, PreferencePair, ReferenceSnapshot};

/// Inverse of a dense `n×n` row-major matrix by Gauss–Jordan elimination
/// with partial pivoting.
pub fn gauss_jordan_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let w = 2 * n;
    let mut m = vec![0.0; n * w];
    for i in 0..n {
        m[i * w..i * w + n].copy_from_slice(&a[i * n..(i + 1) * n]);
        m[i * w + n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x * w + col].abs().total_cmp(&m[y * w + col].abs()))
            .unwrap();
        if pivot != col {
            for j in 0..w {
                m.swap(col * w + j, pivot * w + j);
            }
        }
        let p = m[col * w + col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for j in 0..w {
            m[col * w + j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * w + col];
                if f != 0.0 {
                    for j in 0..w {
                        m[r * w + j] -= f * m[col * w + j];
                    }
                }
            }
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n..(i + 1) * n].copy_from_slice(&m[i * w + n..(i + 1) * w]);
    }
    inv
}

/// Linear-interpolation quantile (`h = q·(n−1)`) by direct sorting.
pub fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// A small environment for instance-level checks.
pub fn small_env(seed: u64) -> Environment {
    generate_environment(&EnvironmentConfig {
        categories: 2,
        queries_per_category: 5,
        universe_size: 6,
        response_dim: 5,
        context_dim: 4,
        max_length: 4,
        gold_std: 1.0,
        seed,
        ..EnvironmentConfig::default()
    })
    .unwrap()
}

pub fn random_vector(rng: &mut RngStream, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random gold-free pairs (orientation arbitrary) over `queries`.
pub fn random_pairs<'a>(queries: &'a [Query], count: usize, rng: &mut RngStream) -> Vec<PreferencePair<'a>> {
    (0..count)
        .map(|_| {
            let q = &queries[rng.random_range(0..queries.len())];
            let u = q.universe.len();
            let w = rng.random_range(0..u);
            let mut l = rng.random_range(0..u - 1);
            if l >= w {
                l += 1;
            }
            PreferencePair::new(q, w, l, PairSource::Gold, 1.0, 0.0).unwrap()
        })
        .collect()
}

/// Central finite-difference gradient of `combined_loss`.
pub fn fd_gradient(
    params: &PolicyParams,
    reference: &ReferenceSnapshot,
    pairs: &[PreferencePair],
    beta: f64,
    mode: LossMode,
    h: f64,
) -> Vec<f64> {
    (0..params.feature_dim())
        .map(|i| {
            let mut plus = params.clone();
            plus.theta[i] += h;
            let mut minus = params.clone();
            minus.theta[i] -= h;
            let lp = combined_loss(&plus, reference, pairs, beta, mode).unwrap();
            let lm = combined_loss(&minus, reference, pairs, beta, mode).unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
