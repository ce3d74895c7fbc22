//! Residual-generator GAN for counterfactuals.
//!
//! The generator `G` maps a normalized profile `x` to a residual; the
//! counterfactual is `x + m * G(x)` where `m` zeroes immutable coordinates.
//! The discriminator `D` learns to tell real rows from counterfactuals, and
//! the fixed classifier supplies the target-class pressure. Per step:
//!
//! - `D` ascends `log D(x) + log(1 - D(x + m*G(x)))`.
//! - `G` descends `-log D(x + m*G(x)) - log C_t(x + m*G(x)) + lambda*|G(x)|^2`
//!   (the non-saturating form of the adversarial and classifier terms).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::finalize::{finalize, CfResult, Method};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::numerics::{
    adam_step, bce_loss, init_params, mlp_backward, mlp_forward, Activation, AdamConfig, AdamState,
    Matrix, MlpGrads, MlpParams, MlpSpec,
};
use crate::predictors::ClassifierModel;
use crate::profiles::{Dataset, ProfileSchema, RawProfile};
use crate::rng::Rand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterganConfig {
    /// Weight of the proximity penalty on the residual.
    pub reg_weight: f64,
    pub target_class: u8,
    pub generator_spec: MlpSpec,
    pub discriminator_spec: MlpSpec,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub beta1: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl CounterganConfig {
    pub fn for_width(width: usize) -> Self {
        Self {
            reg_weight: 1.0,
            target_class: 1,
            generator_spec: MlpSpec::new(
                vec![width, 64, 64, width],
                vec![Activation::Relu, Activation::Relu, Activation::Linear],
            )
            .expect("valid generator spec"),
            discriminator_spec: MlpSpec::new(
                vec![width, 32, 16, 1],
                vec![Activation::Relu, Activation::Relu, Activation::Sigmoid],
            )
            .expect("valid discriminator spec"),
            generator_lr: 2e-4,
            discriminator_lr: 2e-4,
            beta1: 0.5,
            batch_size: 64,
            steps: 2000,
            seed: 0,
        }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        self.generator_spec.validate()?;
        self.discriminator_spec.validate()?;
        if self.generator_spec.input_width() != width || self.generator_spec.output_width() != width {
            return Err(Error::spec("generator input and output width must equal the feature count"));
        }
        if self.discriminator_spec.input_width() != width
            || self.discriminator_spec.output_width() != 1
            || self.discriminator_spec.activations.last() != Some(&Activation::Sigmoid)
        {
            return Err(Error::spec("discriminator must map the features to one sigmoid unit"));
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite())
            || self.steps == 0
            || self.batch_size == 0
            || self.target_class > 1
            || !(self.generator_lr > 0.0 && self.discriminator_lr > 0.0)
            || !(0.0..1.0).contains(&self.beta1)
        {
            return Err(Error::spec(format!("invalid CounteRGAN config {self:?}")));
        }
        Ok(())
    }
}

/// Trained generator and discriminator with their loss traces.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModels {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub d_losses: Vec<f64>,
    pub g_losses: Vec<f64>,
    pub config: CounterganConfig,
    pub schema: Arc<ProfileSchema>,
}

impl GanModels {
    pub fn new(
        generator: MlpParams,
        discriminator: MlpParams,
        config: CounterganConfig,
        schema: Arc<ProfileSchema>,
    ) -> Result<Self> {
        generator.validate()?;
        discriminator.validate()?;
        let w = schema.len();
        if generator.input_width() != w || generator.output_width() != w {
            return Err(Error::spec("generator width does not match the schema"));
        }
        if discriminator.input_width() != w || discriminator.output_width() != 1 {
            return Err(Error::spec("discriminator width does not match the schema"));
        }
        Ok(Self {
            generator,
            discriminator,
            d_losses: Vec::new(),
            g_losses: Vec::new(),
            config,
            schema,
        })
    }

    /// Masked residual `m * G(x)` for one normalized profile.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.generator.forward_one(x)?;
        self.schema.apply_immutable_mask(&mut r);
        Ok(r)
    }

    /// Unmasked generator output `G(x)`.
    pub fn raw_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.generator.forward_one(x)
    }

    /// Loss traces as CSV with columns `step,d_loss,g_loss`.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,d_loss,g_loss\n");
        for (i, (d, g)) in self.d_losses.iter().zip(&self.g_losses).enumerate() {
            out.push_str(&format!("{i},{d},{g}\n"));
        }
        out
    }

    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.loss_csv().as_bytes())
    }
}

fn mask_rows(schema: &ProfileSchema, m: &mut Matrix) {
    for r in 0..m.rows() {
        schema.apply_immutable_mask(m.row_mut(r));
    }
}

/// One gradient of `D` on a batch with a constant label.
fn discriminator_pass(d: &MlpParams, x: &Matrix, label: f64) -> Result<(f64, MlpGrads, Matrix)> {
    let (p, cache) = mlp_forward(d, x)?;
    let target = Matrix::from_vec(x.rows(), 1, vec![label; x.rows()])?;
    let (loss, grad) = bce_loss(&p, &target)?;
    let (grads, dx) = mlp_backward(d, &cache, &grad)?;
    Ok((loss, grads, dx))
}

pub fn countergan_train(
    classifier: &ClassifierModel,
    train: &Dataset,
    config: &CounterganConfig,
) -> Result<GanModels> {
    let schema = Arc::clone(train.schema());
    config.validate(schema.len())?;
    if train.is_empty() {
        return Err(Error::spec("cannot train CounteRGAN on an empty dataset"));
    }
    if classifier.params.input_width() != schema.len() {
        return Err(Error::spec("classifier width does not match the training data"));
    }
    let mut rng = Rand::new(config.seed);
    let mut generator = init_params(&config.generator_spec, &mut rng)?;
    let mut discriminator = init_params(&config.discriminator_spec, &mut rng)?;
    let g_adam_cfg = AdamConfig {
        learning_rate: config.generator_lr,
        beta1: config.beta1,
        ..AdamConfig::default()
    };
    let d_adam_cfg = AdamConfig {
        learning_rate: config.discriminator_lr,
        ..g_adam_cfg
    };
    let mut g_adam = AdamState::new(&generator, g_adam_cfg)?;
    let mut d_adam = AdamState::new(&discriminator, d_adam_cfg)?;
    let target = f64::from(config.target_class);

    let mut d_losses = Vec::with_capacity(config.steps);
    let mut g_losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let fail = |e: Error| Error::Training {
            step,
            message: e.to_string(),
        };
        let idx: Vec<usize> = (0..config.batch_size).map(|_| rng.below(train.len())).collect();
        let x = train.rows().select_rows(&idx);
        let n = x.rows() as f64;

        // Discriminator update on real rows and current counterfactuals.
        let mut residual = generator.forward_batch(&x).map_err(fail)?;
        mask_rows(&schema, &mut residual);
        let fake = x.add(&residual).map_err(fail)?;
        let (d_real, mut d_grads, _) = discriminator_pass(&discriminator, &x, 1.0).map_err(fail)?;
        let (d_fake, d_grads_fake, _) =
            discriminator_pass(&discriminator, &fake, 0.0).map_err(fail)?;
        d_grads.add_assign(&d_grads_fake);
        adam_step(&mut discriminator, &d_grads, &mut d_adam).map_err(fail)?;

        // Generator update through the refreshed discriminator and the fixed classifier.
        let (g_out, g_cache) = mlp_forward(&generator, &x).map_err(fail)?;
        let mut masked = g_out.clone();
        mask_rows(&schema, &mut masked);
        let fake = x.add(&masked).map_err(fail)?;
        let (adv_loss, _, d_fake_input) =
            discriminator_pass(&discriminator, &fake, 1.0).map_err(fail)?;
        let (q, c_cache) = mlp_forward(&classifier.params, &fake).map_err(fail)?;
        let targets = Matrix::from_vec(x.rows(), 1, vec![target; x.rows()]).map_err(fail)?;
        let (cls_loss, cls_grad) = bce_loss(&q, &targets).map_err(fail)?;
        let (_, c_input) = mlp_backward(&classifier.params, &c_cache, &cls_grad).map_err(fail)?;
        let reg_loss = config.reg_weight
            * g_out.as_slice().iter().map(|v| v * v).sum::<f64>()
            / n;
        let mut through = d_fake_input.add(&c_input).map_err(fail)?;
        mask_rows(&schema, &mut through);
        let reg_scale = 2.0 * config.reg_weight / n;
        let g_grad = through
            .zip_with(&g_out, |t, r| t + reg_scale * r)
            .map_err(fail)?;
        let (g_grads, _) = mlp_backward(&generator, &g_cache, &g_grad).map_err(fail)?;
        adam_step(&mut generator, &g_grads, &mut g_adam).map_err(fail)?;

        let d_loss = d_real + d_fake;
        let g_loss = adv_loss + cls_loss + reg_loss;
        if !d_loss.is_finite() || !g_loss.is_finite() {
            return Err(Error::Training {
                step,
                message: "CounteRGAN loss diverged".into(),
            });
        }
        d_losses.push(d_loss);
        g_losses.push(g_loss);
    }

    let mut gan = GanModels::new(generator, discriminator, config.clone(), schema)?;
    gan.d_losses = d_losses;
    gan.g_losses = g_losses;
    Ok(gan)
}

/// One generator pass; results are clamped to the feature bounds.
pub fn countergan_generate(
    gan: &GanModels,
    classifier: &ClassifierModel,
    x_raw: &RawProfile,
) -> Result<CfResult> {
    countergan_generate_with(gan, classifier, x_raw, true)
}

pub fn countergan_generate_with(
    gan: &GanModels,
    classifier: &ClassifierModel,
    x_raw: &RawProfile,
    enforce_bounds: bool,
) -> Result<CfResult> {
    let start = Instant::now();
    let schema = &classifier.schema;
    if gan.schema.len() != schema.len() {
        return Err(Error::spec("GAN and classifier schemas differ in width"));
    }
    let x = schema.normalize(x_raw)?;
    let residual = gan.residual(x.values())?;
    let candidate: Vec<f64> = x.values().iter().zip(&residual).map(|(a, b)| a + b).collect();
    let mut result = finalize(
        x_raw,
        &candidate,
        schema,
        classifier,
        enforce_bounds,
        Method::Countergan,
    )?;
    result.iterations = 1;
    result.elapsed = start.elapsed();
    Ok(result)
}

/// Counterfactuals for many inputs with one batched generator pass.
pub fn countergan_generate_batch(
    gan: &GanModels,
    classifier: &ClassifierModel,
    inputs: &[RawProfile],
) -> Result<Vec<CfResult>> {
    let start = Instant::now();
    let schema = &classifier.schema;
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let normalized = inputs
        .iter()
        .map(|r| schema.normalize(r).map(|n| n.0))
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_rows(&normalized)?;
    let mut residual = gan.generator.forward_batch(&x)?;
    mask_rows(schema, &mut residual);
    let candidates = x.add(&residual)?;
    let mut out = Vec::with_capacity(inputs.len());
    for (i, raw) in inputs.iter().enumerate() {
        let mut r = finalize(raw, candidates.row(i), schema, classifier, true, Method::Countergan)?;
        r.iterations = 1;
        out.push(r);
    }
    let per = start.elapsed() / inputs.len() as u32;
    for r in &mut out {
        r.elapsed = per;
    }
    Ok(out)
}
