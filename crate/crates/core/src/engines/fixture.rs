//! Small trained models shared by the engine tests, built once per process.

use std::sync::OnceLock;

use super::countergan::{countergan_train, CounterganConfig, GanModels};
use crate::predictors::{
    compute_prototypes, train_autoencoder, train_classifier, AutoencoderModel, ClassifierModel,
    PrototypeSet, TrainConfig, DEFAULT_NOISE_STD,
};
use crate::profiles::{generate_dataset, split, Dataset, GeneratorConfig, RawProfile};
use crate::rng::Rand;

pub(crate) struct Fixture {
    pub train: Dataset,
    pub test: Dataset,
    pub classifier: ClassifierModel,
    pub ae: AutoencoderModel,
    pub prototypes: PrototypeSet,
    pub gan: GanModels,
}

impl Fixture {
    /// Raw test profiles the classifier rejects.
    pub fn rejected(&self) -> Vec<RawProfile> {
        let scores = self.classifier.predict_batch(self.test.rows()).unwrap();
        (0..self.test.len())
            .filter(|&i| scores[i] < 0.5)
            .map(|i| self.test.raw_profile(i))
            .collect()
    }
}

/// Short CounteRGAN training run used by the fixture.
pub(crate) fn gan_config() -> CounterganConfig {
    CounterganConfig {
        steps: 300,
        seed: 3,
        ..CounterganConfig::for_width(33)
    }
}

pub(crate) fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = generate_dataset(&GeneratorConfig {
            n_samples: 500,
            seed: 5,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let (train, test) = split(&data, 0.8, &mut Rand::new(5)).unwrap();
        let (classifier, _) = train_classifier(
            &train,
            &test,
            &TrainConfig {
                epochs: 60,
                ..TrainConfig::classifier_default()
            },
        )
        .unwrap();
        let ae = train_autoencoder(
            &train,
            None,
            DEFAULT_NOISE_STD,
            &TrainConfig {
                epochs: 40,
                ..TrainConfig::autoencoder_default()
            },
        )
        .unwrap();
        let prototypes = compute_prototypes(&ae, &train, 5).unwrap();
        let gan = countergan_train(&classifier, &train, &gan_config()).unwrap();
        Fixture {
            train,
            test,
            classifier,
            ae,
            prototypes,
            gan,
        }
    })
}
