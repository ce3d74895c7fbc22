use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{MlpGrads, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// L2 penalty `weight_decay/2 * |W|^2` on weight matrices (biases exempt).
    #[serde(default)]
    pub weight_decay: f64,
}

impl TrainConfig {
    pub fn classifier_default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 7,
            weight_decay: 0.01,
        }
    }

    pub fn autoencoder_default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 11,
            weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite())
        {
            return Err(Error::spec(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// Adds the decay term to weight gradients.
pub(crate) fn apply_weight_decay(grads: &mut MlpGrads, params: &MlpParams, weight_decay: f64) {
    if weight_decay == 0.0 {
        return;
    }
    for (g, p) in grads.layers.iter_mut().zip(&params.layers) {
        for (gw, w) in g.weights.as_mut_slice().iter_mut().zip(p.weights.as_slice()) {
            *gw += weight_decay * w;
        }
    }
}

/// Shuffled mini-batch index lists for one epoch.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut crate::Rand) -> Vec<Vec<usize>> {
    let perm = rng.permutation(n);
    perm.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
