//! Counterfactual feedback for tabular binary classifiers.
//!
//! Three generators are provided and compared:
//!
//! - **RGD**: regularized gradient descent on the input, pulling the
//!   classifier score toward a target under an L1 proximity penalty.
//! - **CSGP**: counterfactual search guided by class prototypes in an
//!   autoencoder latent space, with reconstruction-error realism pressure.
//! - **CounteRGAN**: a residual generator trained adversarially against a
//!   discriminator and the fixed target classifier; inference is one forward
//!   pass.
//!
//! Every result passes through the same finalization: immutable features are
//! restored to the input's values, discrete features are rounded to their
//! grid and (optionally) all features are clamped to their bounds.

pub mod benchmark;
pub mod engines;
pub mod error;
pub mod model_io;
pub mod numerics;
pub mod predictors;
pub mod profiles;
pub mod rng;

mod fsutil;

pub use error::{Error, Result};
pub use fsutil::write_atomic;
pub use rng::Rand;
