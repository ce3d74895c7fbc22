use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::train::{apply_weight_decay, epoch_batches, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, bce_loss, init_params, mlp_backward, mlp_forward, Activation, AdamConfig, AdamState,
    Matrix, MlpParams, MlpSpec,
};
use crate::profiles::{Dataset, NormalizedProfile, ProfileSchema};
use crate::rng::Rand;

/// Approval threshold on the classifier score.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMeta {
    pub seed: u64,
    pub epochs: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// The fixed target classifier: an MLP with a single sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub params: MlpParams,
    pub schema: Arc<ProfileSchema>,
    pub meta: ClassifierMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

pub fn default_classifier_spec(width: usize) -> MlpSpec {
    MlpSpec::new(
        vec![width, 32, 16, 1],
        vec![Activation::Relu, Activation::Relu, Activation::Sigmoid],
    )
    .expect("valid default spec")
}

impl ClassifierModel {
    pub fn new(params: MlpParams, schema: Arc<ProfileSchema>, meta: ClassifierMeta) -> Result<Self> {
        params.validate()?;
        if params.output_width() != 1 || params.spec.activations.last() != Some(&Activation::Sigmoid)
        {
            return Err(Error::spec("classifier must end in a single sigmoid unit"));
        }
        if params.input_width() != schema.len() {
            return Err(Error::spec(format!(
                "classifier input {} does not match schema width {}",
                params.input_width(),
                schema.len()
            )));
        }
        Ok(Self {
            params,
            schema,
            meta,
        })
    }

    pub fn predict(&self, x: &NormalizedProfile) -> Result<f64> {
        Ok(self.params.forward_one(x.values())?[0])
    }

    pub fn predict_slice(&self, x: &[f64]) -> Result<f64> {
        Ok(self.params.forward_one(x)?[0])
    }

    pub fn predict_batch(&self, rows: &Matrix) -> Result<Vec<f64>> {
        Ok(self.params.forward_batch(rows)?.into_vec())
    }

    /// Score and its gradient with respect to the (normalized) input.
    pub fn score_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (out, cache) = mlp_forward(&self.params, &Matrix::row_vector(x))?;
        let (_, dx) = mlp_backward(&self.params, &cache, &Matrix::row_vector(&[1.0]))?;
        Ok((out.get(0, 0), dx.into_vec()))
    }

    pub fn predict_input_gradient(&self, x: &NormalizedProfile) -> Result<Vec<f64>> {
        Ok(self.score_and_gradient(x.values())?.1)
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let scores = self.predict_batch(data.rows())?;
        let hits = scores
            .iter()
            .zip(data.labels())
            .filter(|(s, &l)| (**s >= DECISION_THRESHOLD) == (l == 1))
            .count();
        Ok(hits as f64 / data.len() as f64)
    }
}

pub fn train_classifier(
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
) -> Result<(ClassifierModel, ClassifierReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::spec("cannot train a classifier on an empty dataset"));
    }
    if train.schema().hash() != test.schema().hash() {
        return Err(Error::spec("train and test datasets use different schemas"));
    }
    let mut rng = Rand::new(config.seed);
    let spec = default_classifier_spec(train.schema().len());
    let mut params = init_params(&spec, &mut rng)?;
    let mut adam = AdamState::new(&params, AdamConfig::with_learning_rate(config.learning_rate))?;
    let labels = train.label_matrix();

    let mut step = 0;
    let mut last_loss = f64::NAN;
    for _ in 0..config.epochs {
        for batch in epoch_batches(train.len(), config.batch_size, &mut rng) {
            let x = train.rows().select_rows(&batch);
            let y = labels.select_rows(&batch);
            let (out, cache) = mlp_forward(&params, &x).map_err(|e| training_error(step, e))?;
            let (loss, grad) = bce_loss(&out, &y).map_err(|e| training_error(step, e))?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    step,
                    message: "classifier loss diverged".into(),
                });
            }
            let (mut grads, _) =
                mlp_backward(&params, &cache, &grad).map_err(|e| training_error(step, e))?;
            apply_weight_decay(&mut grads, &params, config.weight_decay);
            adam_step(&mut params, &grads, &mut adam).map_err(|e| training_error(step, e))?;
            last_loss = loss;
            step += 1;
        }
    }

    let mut model = ClassifierModel::new(
        params,
        Arc::clone(train.schema()),
        ClassifierMeta {
            seed: config.seed,
            epochs: config.epochs,
            train_accuracy: 0.0,
            test_accuracy: 0.0,
        },
    )?;
    let train_accuracy = model.accuracy(train)?;
    let test_accuracy = model.accuracy(test)?;
    model.meta.train_accuracy = train_accuracy;
    model.meta.test_accuracy = test_accuracy;
    Ok((
        model,
        ClassifierReport {
            train_accuracy,
            test_accuracy,
            final_loss: last_loss,
        },
    ))
}

pub(crate) fn training_error(step: usize, e: Error) -> Error {
    match e {
        Error::Training { .. } => e,
        other => Error::Training {
            step,
            message: other.to_string(),
        },
    }
}
