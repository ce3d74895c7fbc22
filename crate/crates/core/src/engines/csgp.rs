//! Counterfactual search guided by class prototypes.
//!
//! Optimizes a perturbation `delta` (mutable coordinates only) of
//!
//! ```text
//! c * (C(x + delta) - target)^2 + beta * |delta|_1 + l2 * |delta|_2^2
//!   + theta * |enc(x + delta) - proto_t(x)|^2
//!   + gamma * |AE(x + delta) - (x + delta)|^2
//! ```
//!
//! The smooth terms take gradient steps; the L1 term is applied as a
//! soft-threshold after each step, which yields exact zeros on features the
//! search leaves alone.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::finalize::{finalize, CfResult, Method};
use crate::error::{Error, Result};
use crate::numerics::{mlp_backward, mlp_forward, Matrix};
use crate::predictors::{AutoencoderModel, ClassifierModel, PrototypeSet};
use crate::profiles::RawProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsgpConfig {
    pub pred_weight: f64,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub proto_weight: f64,
    pub ae_weight: f64,
    pub k: usize,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Score the prediction term pulls toward.
    pub target_prob: f64,
    pub target_class: u8,
    pub enforce_bounds: bool,
}

impl Default for CsgpConfig {
    fn default() -> Self {
        Self {
            pred_weight: 1.0,
            l1_weight: 0.1,
            l2_weight: 0.1,
            proto_weight: 0.5,
            ae_weight: 0.5,
            k: 5,
            learning_rate: 0.01,
            max_iters: 1000,
            target_prob: 1.0,
            target_class: 1,
            enforce_bounds: true,
        }
    }
}

impl CsgpConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.pred_weight,
            self.l1_weight,
            self.l2_weight,
            self.proto_weight,
            self.ae_weight,
        ];
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || self.k == 0
            || !(self.learning_rate > 0.0)
            || self.max_iters == 0
            || self.target_class > 1
        {
            return Err(Error::spec(format!("invalid CSGP config {self:?}")));
        }
        Ok(())
    }
}

/// Gradient of the smooth part of the objective at `z = x + delta`.
fn smooth_gradient(
    classifier: &ClassifierModel,
    ae: &AutoencoderModel,
    proto: &[f64],
    z: &[f64],
    delta: &[f64],
    config: &CsgpConfig,
) -> Result<Vec<f64>> {
    let (score, dscore) = classifier.score_and_gradient(z)?;
    let mut grad: Vec<f64> = dscore
        .iter()
        .zip(delta)
        .map(|(g, d)| config.pred_weight * 2.0 * (score - config.target_prob) * g + 2.0 * config.l2_weight * d)
        .collect();

    if config.proto_weight > 0.0 || config.ae_weight > 0.0 {
        let input = Matrix::row_vector(z);
        let (latent, enc_cache) = mlp_forward(&ae.encoder, &input)?;
        let (recon, dec_cache) = mlp_forward(&ae.decoder, &latent)?;
        let resid: Vec<f64> = recon.row(0).iter().zip(z).map(|(r, v)| r - v).collect();
        let d_recon = Matrix::row_vector(
            &resid.iter().map(|r| 2.0 * config.ae_weight * r).collect::<Vec<_>>(),
        );
        let (_, d_latent_ae) = mlp_backward(&ae.decoder, &dec_cache, &d_recon)?;
        let d_latent: Vec<f64> = latent
            .row(0)
            .iter()
            .zip(proto)
            .zip(d_latent_ae.row(0))
            .map(|((l, p), a)| a + 2.0 * config.proto_weight * (l - p))
            .collect();
        let (_, d_input) = mlp_backward(&ae.encoder, &enc_cache, &Matrix::row_vector(&d_latent))?;
        for ((g, di), r) in grad.iter_mut().zip(d_input.row(0)).zip(&resid) {
            *g += di - 2.0 * config.ae_weight * r;
        }
    }
    Ok(grad)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn csgp_generate(
    classifier: &ClassifierModel,
    ae: &AutoencoderModel,
    prototypes: &PrototypeSet,
    x_raw: &RawProfile,
    config: &CsgpConfig,
) -> Result<CfResult> {
    config.validate()?;
    let start = Instant::now();
    let schema = &classifier.schema;
    if ae.schema.len() != schema.len() {
        return Err(Error::spec("autoencoder and classifier schemas differ in width"));
    }
    let x = schema.normalize(x_raw)?;
    let x = x.values();
    let mutable = schema.mutable_mask();
    let proto = prototypes.prototype_near_k(&ae.encode(x)?, config.target_class, config.k)?;

    let mut delta = vec![0.0; x.len()];
    let mut z = x.to_vec();
    let threshold = config.learning_rate * config.l1_weight;
    for it in 0..config.max_iters {
        let g = smooth_gradient(classifier, ae, &proto, &z, &delta, config)
            .map_err(|e| Error::numeric(format!("CSGP failed at iteration {it}: {e}")))?;
        for j in 0..x.len() {
            if mutable[j] {
                delta[j] = soft_threshold(delta[j] - config.learning_rate * g[j], threshold);
            }
            z[j] = x[j] + delta[j];
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "CSGP iterate became non-finite at iteration {it}"
            )));
        }
    }

    let mut result = finalize(
        x_raw,
        &z,
        schema,
        classifier,
        config.enforce_bounds,
        Method::Csgp,
    )?;
    result.iterations = config.max_iters;
    result.elapsed = start.elapsed();
    Ok(result)
}
