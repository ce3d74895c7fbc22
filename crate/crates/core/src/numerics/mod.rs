//! Minimal dense-network core shared by every trained model.

mod adam;
mod loss;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{bce_loss, mse_loss, PROB_CLAMP};
pub use matrix::Matrix;
pub use mlp::{
    init_params, mlp_backward, mlp_forward, sigmoid, Activation, Dense, ForwardCache, MlpGrads,
    MlpParams, MlpSpec,
};
