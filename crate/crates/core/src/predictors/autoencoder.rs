use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::classifier::training_error;
use super::train::{epoch_batches, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, init_params, mlp_backward, mlp_forward, mse_loss, Activation, AdamConfig, AdamState,
    Matrix, MlpParams, MlpSpec,
};
use crate::profiles::{Dataset, ProfileSchema};
use crate::rng::Rand;

pub const DEFAULT_NOISE_STD: f64 = 0.1;
pub const LATENT_WIDTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub test_reconstruction_error: f64,
}

/// Denoising autoencoder used by the realism metric and by CSGP.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub noise_std: f64,
    pub schema: Arc<ProfileSchema>,
    pub meta: AutoencoderMeta,
}

pub fn default_autoencoder_specs(width: usize) -> (MlpSpec, MlpSpec) {
    (
        MlpSpec::new(
            vec![width, 16, LATENT_WIDTH],
            vec![Activation::Relu, Activation::Linear],
        )
        .expect("valid encoder spec"),
        MlpSpec::new(
            vec![LATENT_WIDTH, 16, width],
            vec![Activation::Relu, Activation::Linear],
        )
        .expect("valid decoder spec"),
    )
}

impl AutoencoderModel {
    pub fn new(
        encoder: MlpParams,
        decoder: MlpParams,
        noise_std: f64,
        schema: Arc<ProfileSchema>,
        meta: AutoencoderMeta,
    ) -> Result<Self> {
        encoder.validate()?;
        decoder.validate()?;
        let width = schema.len();
        if encoder.input_width() != width || decoder.output_width() != width {
            return Err(Error::spec("autoencoder input/output width must match the schema"));
        }
        if encoder.output_width() != decoder.input_width() {
            return Err(Error::spec("encoder output does not feed the decoder"));
        }
        if encoder.output_width() >= width {
            return Err(Error::spec("latent width must be smaller than the input width"));
        }
        Ok(Self {
            encoder,
            decoder,
            noise_std,
            schema,
            meta,
        })
    }

    pub fn latent_width(&self) -> usize {
        self.encoder.output_width()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward_one(x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward_one(&self.encoder.forward_one(x)?)
    }

    /// Squared Euclidean norm of `reconstruct(x) - x`.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let r = self.reconstruct(x)?;
        Ok(r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    pub fn encode_batch(&self, rows: &Matrix) -> Result<Matrix> {
        self.encoder.forward_batch(rows)
    }
}

pub fn train_autoencoder(
    train: &Dataset,
    test: Option<&Dataset>,
    noise_std: f64,
    config: &TrainConfig,
) -> Result<AutoencoderModel> {
    config.validate()?;
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(Error::spec("denoising noise std must be positive"));
    }
    if train.is_empty() {
        return Err(Error::spec("cannot train an autoencoder on an empty dataset"));
    }
    let width = train.schema().len();
    let mut rng = Rand::new(config.seed);
    let (enc_spec, dec_spec) = default_autoencoder_specs(width);
    let mut encoder = init_params(&enc_spec, &mut rng)?;
    let mut decoder = init_params(&dec_spec, &mut rng)?;
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let mut enc_adam = AdamState::new(&encoder, adam_cfg)?;
    let mut dec_adam = AdamState::new(&decoder, adam_cfg)?;

    let mut step = 0;
    let mut last_loss = f64::NAN;
    for _ in 0..config.epochs {
        for batch in epoch_batches(train.len(), config.batch_size, &mut rng) {
            let clean = train.rows().select_rows(&batch);
            let mut noisy = clean.clone();
            for v in noisy.as_mut_slice() {
                *v += noise_std * rng.normal();
            }
            let mut run = || -> Result<f64> {
                let (latent, enc_cache) = mlp_forward(&encoder, &noisy)?;
                let (recon, dec_cache) = mlp_forward(&decoder, &latent)?;
                let (loss, grad) = mse_loss(&recon, &clean)?;
                let (dec_grads, d_latent) = mlp_backward(&decoder, &dec_cache, &grad)?;
                let (enc_grads, _) = mlp_backward(&encoder, &enc_cache, &d_latent)?;
                adam_step(&mut decoder, &dec_grads, &mut dec_adam)?;
                adam_step(&mut encoder, &enc_grads, &mut enc_adam)?;
                Ok(loss)
            };
            let loss = run().map_err(|e| training_error(step, e))?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    step,
                    message: "autoencoder loss diverged".into(),
                });
            }
            last_loss = loss;
            step += 1;
        }
    }

    let mut model = AutoencoderModel::new(
        encoder,
        decoder,
        noise_std,
        Arc::clone(train.schema()),
        AutoencoderMeta {
            seed: config.seed,
            epochs: config.epochs,
            final_loss: last_loss,
            test_reconstruction_error: f64::NAN,
        },
    )?;
    if let Some(test) = test {
        model.meta.test_reconstruction_error = mean_reconstruction_error(&model, test.rows())?;
    }
    Ok(model)
}

pub fn mean_reconstruction_error(ae: &AutoencoderModel, rows: &Matrix) -> Result<f64> {
    if rows.rows() == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for r in rows.iter_rows() {
        total += ae.reconstruction_error(r)?;
    }
    Ok(total / rows.rows() as f64)
}
