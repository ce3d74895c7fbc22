use serde::{Deserialize, Serialize};

use super::mlp::{Dense, MlpGrads, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::spec(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Dense>,
    second: Vec<Dense>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        let zeros = MlpGrads::zeros_like(params).layers;
        Ok(Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != params.layers.len() || state.first.len() != params.layers.len() {
        return Err(Error::spec("gradient or optimizer state does not match parameters"));
    }
    for ((p, g), m) in params.layers.iter().zip(&grads.layers).zip(&state.first) {
        if p.weights.shape() != g.weights.shape()
            || p.bias.len() != g.bias.len()
            || m.weights.shape() != p.weights.shape()
        {
            return Err(Error::spec("gradient shape does not match parameter shape"));
        }
    }
    if !grads.all_finite() {
        return Err(Error::numeric("non-finite gradient passed to Adam"));
    }
    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        update_slice(
            p.weights.as_mut_slice(),
            g.weights.as_slice(),
            m.weights.as_mut_slice(),
            v.weights.as_mut_slice(),
            &cfg,
            c1,
            c2,
        );
        update_slice(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias, &cfg, c1, c2);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Matrix, MlpSpec};

    fn scalar_param(w: f64) -> MlpParams {
        MlpParams {
            spec: MlpSpec::new(vec![1, 1], vec![Activation::Linear]).unwrap(),
            layers: vec![Dense {
                weights: Matrix::from_vec(1, 1, vec![w]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    fn grad_of(gw: f64, gb: f64) -> MlpGrads {
        MlpGrads {
            layers: vec![Dense {
                weights: Matrix::from_vec(1, 1, vec![gw]).unwrap(),
                bias: vec![gb],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = scalar_param(1.25);
        let mut s = AdamState::new(&p, AdamConfig::default()).unwrap();
        adam_step(&mut p, &grad_of(0.0, 0.0), &mut s).unwrap();
        assert_eq!(p.layers[0].weights.get(0, 0), 1.25);
        assert_eq!(p.layers[0].bias[0], 0.0);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        for g in [3.0, -0.2] {
            let mut p = scalar_param(0.0);
            let mut s = AdamState::new(&p, cfg).unwrap();
            adam_step(&mut p, &grad_of(g, 0.0), &mut s).unwrap();
            let expected = -0.01 * g / (g.abs() + cfg.epsilon);
            let moved = p.layers[0].weights.get(0, 0);
            assert!((moved - expected).abs() < 1e-15);
            assert_eq!(moved.signum(), -g.signum());
        }
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        // f(w) = (w - 3)^2 starting from 0.
        let mut p = scalar_param(0.0);
        let mut s = AdamState::new(&p, AdamConfig::with_learning_rate(0.05)).unwrap();
        for _ in 0..5000 {
            let w = p.layers[0].weights.get(0, 0);
            adam_step(&mut p, &grad_of(2.0 * (w - 3.0), 0.0), &mut s).unwrap();
        }
        let w = p.layers[0].weights.get(0, 0);
        assert!((w - 3.0).abs() < 1e-3, "w = {w}");
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = scalar_param(0.0);
        let mut s = AdamState::new(&p, AdamConfig::default()).unwrap();
        let err = adam_step(&mut p, &grad_of(f64::NAN, 0.0), &mut s).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let p = scalar_param(0.0);
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(&p, bad).is_err());
    }
}
