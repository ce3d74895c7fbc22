//! The three counterfactual generators, shared finalization and feedback diffs.

mod countergan;
mod csgp;
mod diff;
mod finalize;
#[cfg(test)]
pub(crate) mod fixture;
mod rgd;

pub use countergan::{
    countergan_generate, countergan_generate_batch, countergan_generate_with, countergan_train, CounterganConfig, GanModels,
};
pub use csgp::{csgp_generate, CsgpConfig};
pub use diff::{make_diff, DiffEntry, FeedbackDiff};
pub use finalize::{finalize, CfResult, Method};
pub use rgd::{rgd_generate, RgdConfig};
