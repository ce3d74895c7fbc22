//! The fixed target classifier, the denoising autoencoder, and latent class
//! prototypes.

mod autoencoder;
mod classifier;
mod prototypes;
mod train;

pub use autoencoder::{
    default_autoencoder_specs, mean_reconstruction_error, train_autoencoder, AutoencoderMeta,
    AutoencoderModel, DEFAULT_NOISE_STD, LATENT_WIDTH,
};
pub use classifier::{
    default_classifier_spec, train_classifier, ClassifierMeta, ClassifierModel, ClassifierReport,
    DECISION_THRESHOLD,
};
pub use prototypes::{compute_prototypes, ClassEncodings, PrototypeSet, DEFAULT_PROTOTYPE_K};
pub use train::TrainConfig;
