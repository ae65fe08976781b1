//! Linear max-margin backend.
//!
//! One binary linear classifier per appliance, trained by stochastic
//! gradient descent on the hinge loss with L2 regularization. Features are
//! standardized to the training set's per-column mean and variance; the
//! fitted standardizer is stored in the model and replayed at prediction
//! time, so callers always pass raw feature rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_weights, stream_seed, TrainConfig};
use crate::features::{FeatureMatrix, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginModel {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl MarginModel {
    /// Signed distance-like score for a raw (unstandardized) feature row.
    /// Positive means ON.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mean = self.standardizer.mean();
        let scale = self.standardizer.scale();
        let mut score = self.bias;
        for j in 0..row.len() {
            score += self.weights[j] * (row[j] - mean[j]) / scale[j];
        }
        score
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        self.decision(row) > 0.0
    }

    #[cfg(test)]
    pub(crate) fn weights(&self) -> (&[f64], f64) {
        (&self.weights, self.bias)
    }
}

/// Train one classifier. Epoch order is shuffled by a stream keyed on
/// (seed, scope), so results do not depend on what else trains concurrently.
pub(crate) fn train_margin(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
    seed: u64,
    scope: &str,
) -> MarginModel {
    let standardizer = Standardizer::fit(features);
    let mut x = features.clone();
    standardizer.transform(&mut x);

    let (w_off, w_on) = class_weights(labels, config.balance_classes);
    let dim = x.dim();
    let mut weights = vec![0.0_f64; dim];
    let mut bias = 0.0_f64;
    let lr = config.learning_rate;
    let decay = 1.0 - lr * config.regularization;

    let mut order: Vec<u32> = (0..labels.len() as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, scope, 0));
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = x.row(i as usize);
            let (y, c) = if labels[i as usize] {
                (1.0, w_on)
            } else {
                (-1.0, w_off)
            };
            let score: f64 = weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + bias;
            if y * score < 1.0 {
                let step = lr * c * y;
                for (w, xj) in weights.iter_mut().zip(row) {
                    *w = *w * decay + step * xj;
                }
                bias += step;
            } else {
                for w in weights.iter_mut() {
                    *w *= decay;
                }
            }
        }
    }
    MarginModel {
        standardizer,
        weights,
        bias,
    }
}
