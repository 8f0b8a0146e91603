use super::Vector;
use crate::error::{ensure, Error, Result};

/// Linear-interpolation quantile on sorted order statistics, index `q·(n−1)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyHistory);
    }
    ensure!((0.0..=1.0).contains(&q), Domain, "quantile level {q} outside [0, 1]");
    ensure!(
        values.iter().all(|v| v.is_finite()),
        Contract,
        "quantile input contains non-finite values"
    );
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// `log softmax(logits / temperature)`, max-shifted.
pub fn log_softmax(logits: &[f64], temperature: f64) -> Result<Vector> {
    ensure!(
        temperature > 0.0 && temperature.is_finite(),
        Domain,
        "temperature must be positive, got {temperature}"
    );
    ensure!(!logits.is_empty(), Contract, "log_softmax of an empty vector");
    ensure!(
        logits.iter().all(|x| x.is_finite()),
        Contract,
        "log_softmax input contains non-finite logits"
    );
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|x| (x - max) / temperature).collect();
    let log_z = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    Ok(shifted.into_iter().map(|s| s - log_z).collect::<Vec<_>>().into())
}

pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vector> {
    let mut out = log_softmax(logits, temperature)?;
    for x in out.iter_mut() {
        *x = x.exp();
    }
    Ok(out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standardizes to zero mean and unit (population) variance; a constant
/// input maps to all zeros.
pub fn zscore(values: &[f64]) -> Vec<f64> {
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len().max(1) as f64;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mu.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mu) / sd).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(), 3.0);
        // h = 0.2 * (2 - 1) = 0.2 → 0 + 0.2 * 10
        assert!((quantile(&[0.0, 10.0], 0.2).unwrap() - 2.0).abs() < 1e-15);
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(quantile(&[7.0], q).unwrap(), 7.0);
        }
        assert_eq!(quantile(&[5.0, 1.0, 3.0], 1.0).unwrap(), 5.0);
        assert_eq!(quantile(&[5.0, 1.0, 3.0], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn quantile_errors() {
        assert!(matches!(quantile(&[], 0.5), Err(Error::EmptyHistory)));
        assert!(matches!(quantile(&[1.0], 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn log_softmax_examples() {
        let half = 0.5f64.ln();
        let out = log_softmax(&[0.0, 0.0], 1.0).unwrap();
        assert!((out[0] - half).abs() < 1e-15 && (out[1] - half).abs() < 1e-15);
        let out = log_softmax(&[1000.0, 1000.0], 1.0).unwrap();
        assert!((out[0] - half).abs() < 1e-15 && (out[1] - half).abs() < 1e-15);
        let e = std::f64::consts::E;
        let out = log_softmax(&[1.0, 0.0], 1.0).unwrap();
        assert!((out[0] - (e / (e + 1.0)).ln()).abs() < 1e-15);
        assert!((out[0] + 0.3133).abs() < 1e-4);
    }

    #[test]
    fn log_softmax_rejects_bad_temperature() {
        assert!(matches!(log_softmax(&[1.0], 0.0), Err(Error::Domain(_))));
        assert!(matches!(log_softmax(&[1.0], -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zscore_of_constant_is_zero() {
        assert_eq!(zscore(&[2.0, 2.0, 2.0]), vec![0.0; 3]);
        let z = zscore(&[1.0, 3.0]);
        assert!((z[0] + 1.0).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
    }
}
