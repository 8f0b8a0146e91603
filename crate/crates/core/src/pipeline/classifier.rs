use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{softmax, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    /// Stop once the training loss changes by less than this between epochs.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            tolerance: 1e-6,
            max_epochs: 20_000,
        }
    }
}

/// Multinomial logistic regression with a bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    /// One row of `dim + 1` weights per class; the last entry is the bias.
    pub weights: Vec<Vector>,
    pub trained: bool,
}

impl LogisticClassifier {
    pub fn untrained(num_classes: usize, dim: usize) -> Self {
        Self {
            weights: vec![Vector::zeros(dim + 1); num_classes],
            trained: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()])
            .collect()
    }
}

/// Argmax class for `context`; ties go to the lowest class.
pub fn classifier_select(classifier: &LogisticClassifier, context: &[f64]) -> Result<usize> {
    if !classifier.trained {
        return Err(Error::State("classifier has not been trained".into()));
    }
    ensure!(
        classifier.weights.first().is_some_and(|w| w.dim() == context.len() + 1),
        Contract,
        "context dimension does not match the classifier"
    );
    let logits = classifier.logits(context);
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    Ok(best)
}

fn mean_loss(clf: &LogisticClassifier, examples: &[(Vector, usize)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in examples {
        let p = softmax(&clf.logits(x), 1.0)?;
        total -= p[*y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / examples.len() as f64)
}

/// Full-batch gradient descent on the cross-entropy until the loss changes by
/// less than `config.tolerance` between epochs (or `max_epochs` is hit).
pub fn train_classifier(
    examples: &[(Vector, usize)],
    num_classes: usize,
    config: &ClassifierConfig,
) -> Result<LogisticClassifier> {
    ensure!(!examples.is_empty(), Config, "no labelled contexts to train on");
    let dim = examples[0].0.dim();
    ensure!(
        examples.iter().all(|(x, _)| x.dim() == dim),
        Contract,
        "labelled contexts have different dimensions"
    );
    let mut seen = vec![false; num_classes];
    for (_, y) in examples {
        ensure!(*y < num_classes, Config, "label {y} out of range for {num_classes} classes");
        seen[*y] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Config(format!("class {missing} has no training examples")));
    }

    let mut clf = LogisticClassifier::untrained(num_classes, dim);
    let n = examples.len() as f64;
    let mut last = mean_loss(&clf, examples)?;
    for _ in 0..config.max_epochs {
        let mut grad = vec![vec![0.0; dim + 1]; num_classes];
        for (x, y) in examples {
            let p = softmax(&clf.logits(x), 1.0)?;
            for (c, g) in grad.iter_mut().enumerate() {
                let err = p[c] - if c == *y { 1.0 } else { 0.0 };
                for (gi, xi) in g.iter_mut().zip(x.iter()) {
                    *gi += err * xi / n;
                }
                g[dim] += err / n;
            }
        }
        for (w, g) in clf.weights.iter_mut().zip(&grad) {
            w.axpy(-config.learning_rate, g);
        }
        let loss = mean_loss(&clf, examples)?;
        if (last - loss).abs() < config.tolerance {
            break;
        }
        last = loss;
    }
    clf.trained = true;
    Ok(clf)
}
