//! Class prototypes in the autoencoder latent space, used to guide CSGP.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::profiles::Dataset;

pub const DEFAULT_PROTOTYPE_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEncodings {
    pub label: u8,
    /// One latent row per training row of this class.
    pub encodings: Matrix,
    /// Mean encoding of the class.
    pub prototype: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub k: usize,
    pub classes: Vec<ClassEncodings>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Vec<f64> {
    let mut sum = vec![0.0; width];
    let mut n = 0usize;
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
        n += 1;
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// Encodes every row of `dataset` and groups the encodings by label.
///
/// Encodings are stored in a canonical (lexicographic) order so that later
/// queries do not depend on dataset row order.
pub fn compute_prototypes(ae: &AutoencoderModel, dataset: &Dataset, k: usize) -> Result<PrototypeSet> {
    if k == 0 {
        return Err(Error::spec("prototype k must be at least 1"));
    }
    let encoded = ae.encode_batch(dataset.rows())?;
    let width = ae.latent_width();
    let mut classes = Vec::new();
    for label in [0u8, 1u8] {
        let mut rows: Vec<&[f64]> = encoded
            .iter_rows()
            .zip(dataset.labels())
            .filter(|(_, &l)| l == label)
            .map(|(r, _)| r)
            .collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| lexicographic(a, b));
        let prototype = mean_of(rows.iter().copied(), width);
        classes.push(ClassEncodings {
            label,
            encodings: Matrix::from_rows(&rows)?,
            prototype,
        });
    }
    Ok(PrototypeSet { k, classes })
}

impl PrototypeSet {
    pub fn class(&self, label: u8) -> Result<&ClassEncodings> {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::spec(format!("no training rows of class {label} for prototypes")))
    }

    /// Mean of the `k` class-`target` encodings nearest to `latent`.
    ///
    /// Ties in distance are broken by the encodings' values, so the result is
    /// independent of training row order. `k` is capped at the class size.
    pub fn prototype_near(&self, latent: &[f64], target: u8) -> Result<Vec<f64>> {
        self.prototype_near_k(latent, target, self.k)
    }

    /// [`Self::prototype_near`] with an explicit neighbour count.
    pub fn prototype_near_k(&self, latent: &[f64], target: u8, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::spec("prototype k must be at least 1"));
        }
        let class = self.class(target)?;
        if latent.len() != class.encodings.cols() {
            return Err(Error::spec(format!(
                "latent width {} does not match prototypes {}",
                latent.len(),
                class.encodings.cols()
            )));
        }
        let mut scored: Vec<(f64, &[f64])> = class
            .encodings
            .iter_rows()
            .map(|r| {
                let d: f64 = r.iter().zip(latent).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, r)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lexicographic(a.1, b.1)));
        let k = k.min(scored.len());
        Ok(mean_of(scored[..k].iter().map(|(_, r)| *r), latent.len()))
    }

    pub fn prototype_for(&self, ae: &AutoencoderModel, x: &[f64], target: u8) -> Result<Vec<f64>> {
        self.prototype_near(&ae.encode(x)?, target)
    }
}
