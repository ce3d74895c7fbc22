//! Regularized gradient descent on the input.
//!
//! Minimizes `(C(x_cf) - target)^2 + l1_weight * |x_cf - x|_1` in normalized
//! space, starting at `x`. Immutable coordinates are reset after every step.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::finalize::{finalize, CfResult, Method};
use crate::error::{Error, Result};
use crate::predictors::ClassifierModel;
use crate::profiles::RawProfile;

/// Powers of two below and above the base learning rate searched per step.
/// Saturated scores have gradients many orders of magnitude below the L1 term.
const GRID_BELOW: i32 = 20;
const GRID_ABOVE: i32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgdConfig {
    pub target_prob: f64,
    pub l1_weight: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub enforce_bounds: bool,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for RgdConfig {
    fn default() -> Self {
        Self {
            target_prob: 0.95,
            l1_weight: 0.1,
            learning_rate: 0.05,
            max_iters: 1000,
            enforce_bounds: false,
            record_trace: false,
        }
    }
}

impl RgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_prob > 0.0 && self.target_prob < 1.0)
            || !(self.l1_weight >= 0.0)
            || !(self.learning_rate > 0.0)
            || self.max_iters == 0
        {
            return Err(Error::spec(format!("invalid RGD config {self:?}")));
        }
        Ok(())
    }
}

fn objective(score: f64, target: f64, l1_weight: f64, x_cf: &[f64], x: &[f64]) -> f64 {
    let l1: f64 = x_cf.iter().zip(x).map(|(a, b)| (a - b).abs()).sum();
    (score - target).powi(2) + l1_weight * l1
}

pub fn rgd_generate(
    classifier: &ClassifierModel,
    x_raw: &RawProfile,
    config: &RgdConfig,
) -> Result<CfResult> {
    config.validate()?;
    let start = Instant::now();
    let schema = &classifier.schema;
    let x = schema.normalize(x_raw)?;
    let x = x.values();
    let mutable = schema.mutable_mask();
    let target = config.target_prob;

    let mut x_cf = x.to_vec();
    let (mut score, mut grad) = classifier.score_and_gradient(&x_cf)?;
    let mut current = objective(score, target, config.l1_weight, &x_cf, x);
    let mut trace = config.record_trace.then(Vec::new);
    let mut iterations = 0;
    let mut direction = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];

    while score < target && iterations < config.max_iters {
        iterations += 1;
        for j in 0..x.len() {
            direction[j] = if mutable[j] {
                let d = x_cf[j] - x[j];
                let l1 = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                2.0 * (score - target) * grad[j] + config.l1_weight * l1
            } else {
                0.0
            };
        }

        let eval = |step: f64, out: &mut Vec<f64>| -> Result<(f64, f64, Vec<f64>)> {
            for j in 0..x.len() {
                out[j] = if mutable[j] {
                    x_cf[j] - step * direction[j]
                } else {
                    x[j]
                };
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!(
                    "RGD iterate became non-finite at iteration {iterations}"
                )));
            }
            let (s, g) = classifier.score_and_gradient(out).map_err(|e| {
                Error::numeric(format!("RGD failed at iteration {iterations}: {e}"))
            })?;
            Ok((objective(s, target, config.l1_weight, out, x), s, g))
        };

        // Step size: the best point on a geometric grid along the ray. The
        // objective is not unimodal on the ray (the L1 cost grows before a
        // saturated score moves), so a local line search would stall.
        let mut best = (f64::INFINITY, score, Vec::new());
        let mut probe = vec![0.0; x.len()];
        for k in -GRID_BELOW..=GRID_ABOVE {
            let next = eval(config.learning_rate * 2f64.powi(k), &mut probe)?;
            if next.0 < best.0 {
                best = next;
                std::mem::swap(&mut trial, &mut probe);
            }
        }
        let accepted = best.0 < current;

        if !accepted {
            // No point on the ray improves the objective: converged.
            break;
        }
        std::mem::swap(&mut x_cf, &mut trial);
        (current, score, grad) = best;
        if let Some(t) = trace.as_mut() {
            t.push((score - target).powi(2));
        }
    }

    let mut result = finalize(
        x_raw,
        &x_cf,
        schema,
        classifier,
        config.enforce_bounds,
        Method::Rgd,
    )?;
    result.iterations = iterations;
    result.trace = trace;
    result.elapsed = start.elapsed();
    Ok(result)
}
