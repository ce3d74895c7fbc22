//! Calibrated synthetic candidate profiles over the default schema.
//!
//! Each row draws a hidden profile-strength class and three latent factors
//! (seniority, writing effort, market position); features load on one factor
//! and shift with the class, which gives the data the low-dimensional
//! structure the autoencoder and discriminator learn. Labels come
//! from a hidden linear score plus Gaussian noise, with the bias solved by
//! bisection so the positive rate hits its target.

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::{default_schema, FeatureKind, ProfileSchema};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix};
use crate::rng::Rand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_samples: usize,
    pub target_positive_rate: f64,
    pub seed: u64,
    /// Std of the label noise relative to the unit-variance hidden score.
    /// 0.5 puts the noise-free rule at roughly 0.85 accuracy.
    pub label_noise_std: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_samples: 3029,
            target_positive_rate: 0.43,
            seed: 42,
            label_noise_std: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::spec("n_samples must be positive"));
        }
        if !(self.target_positive_rate > 0.0 && self.target_positive_rate < 1.0) {
            return Err(Error::spec("target_positive_rate must lie in (0, 1)"));
        }
        if !(self.label_noise_std > 0.0 && self.label_noise_std.is_finite()) {
            return Err(Error::spec("label_noise_std must be positive"));
        }
        Ok(())
    }
}

/// A generated dataset together with the labels of the noise-free rule.
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub bayes_labels: Vec<u8>,
    pub bias: f64,
}

impl Generated {
    /// Accuracy of the noise-free hidden rule on the generated labels.
    pub fn bayes_accuracy(&self) -> f64 {
        let hits = self
            .bayes_labels
            .iter()
            .zip(self.dataset.labels())
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / self.dataset.len() as f64
    }
}

/// Shared latent factors behind the features, each standard normal.
#[derive(Clone, Copy)]
enum Factor {
    Seniority,
    Effort,
    Market,
}

const FACTOR_COUNT: usize = 3;

enum Draw {
    /// Uniform over the `multiple_of` grid between the bounds, assigned by the
    /// rank of a latent `load * factor + noise` so the marginal stays uniform.
    Grid(Factor, f64),
    /// Truncated normal: mean, std, class shift (std units), factor, loading.
    Gauss(f64, f64, f64, Factor, f64),
    /// Bernoulli with base probability and class shift.
    Binary(f64, f64),
}

/// Per-feature draws and hidden-score weights, aligned with `default_schema()`.
/// Mutable features carry most of the label signal; immutable ones mostly
/// enter through their correlation with the hidden class.
fn feature_table() -> Vec<(Draw, f64)> {
    use Draw::*;
    use Factor::*;
    vec![
        (Grid(Seniority, 0.8), 0.35),
        (Gauss(6.0, 3.0, 0.4, Effort, 0.9), 0.45),
        (Gauss(0.9, 0.4, 0.6, Seniority, 0.85), 1.5),
        (Gauss(60.0, 25.0, 0.4, Effort, 0.9), 0.5),
        (Gauss(8.0, 5.0, 0.4, Seniority, 0.9), 0.55),
        (Gauss(0.9, 0.35, 0.6, Market, 0.85), 1.3),
        // binary
        (Binary(0.08, 0.06), 0.075),
        (Binary(0.35, 0.2), 0.0625),
        (Binary(0.8, 0.1), 0.05),
        (Binary(0.6, 0.0), 0.0125),
        (Binary(0.15, -0.1), -0.05),
        (Binary(0.5, 0.3), 0.075),
        (Binary(0.3, 0.2), 0.05),
        // counts
        (Gauss(15.0, 6.0, 0.5, Effort, 0.7), 0.075),
        (Gauss(3.0, 2.0, 0.3, Seniority, 0.8), 0.0375),
        (Gauss(2.0, 1.0, 0.2, Seniority, 0.3), 0.025),
        (Gauss(2.0, 2.0, 0.4, Effort, 0.5), 0.05),
        (Gauss(2.0, 1.0, 0.1, Effort, 0.2), 0.0125),
        (Gauss(5.0, 4.0, 0.5, Effort, 0.7), 0.0625),
        (Gauss(20.0, 10.0, 0.6, Market, 0.6), 0.075),
        (Gauss(12.0, 8.0, 0.6, Market, 0.6), 0.075),
        (Gauss(10.0, 7.0, -0.2, Effort, 0.4), -0.025),
        (Gauss(20.0, 12.0, 0.0, Seniority, 0.3), 0.0),
        // marketplace metadata
        (Gauss(0.0, 1.0, 0.5, Market, 0.8), 0.0875),
        (Gauss(0.0, 1.0, -0.3, Market, -0.7), -0.0625),
        (Gauss(0.0, 1.0, 0.2, Seniority, 0.6), 0.0375),
        (Gauss(0.0, 1.0, 0.4, Market, 0.7), 0.075),
        (Gauss(0.0, 1.0, 0.1, Market, 0.5), 0.025),
        (Gauss(0.0, 1.0, -0.4, Market, -0.7), -0.075),
        (Gauss(0.0, 1.0, 0.3, Market, 0.8), 0.05),
        (Gauss(0.0, 1.0, 0.5, Market, 0.8), 0.0875),
        (Gauss(0.0, 1.0, 0.4, Effort, 0.6), 0.075),
        (Gauss(0.0, 1.0, 0.6, Effort, 0.8), 0.1),
    ]
}

/// Draws one raw value; `Grid` features return their latent key instead.
fn draw_value(
    draw: &Draw,
    kind: FeatureKind,
    lower: f64,
    upper: f64,
    class_sign: f64,
    factors: &[f64; FACTOR_COUNT],
    rng: &mut Rand,
) -> f64 {
    let v = match *draw {
        Draw::Grid(factor, load) => {
            return load * factors[factor as usize] + (1.0 - load * load).sqrt() * rng.normal();
        }
        Draw::Binary(p, shift) => {
            let p = (p + 0.5 * shift * class_sign).clamp(0.0, 1.0);
            return if rng.bernoulli(p) { 1.0 } else { 0.0 };
        }
        Draw::Gauss(mean, std, shift, factor, load) => {
            let centre = mean + std * (0.5 * shift * class_sign + load * factors[factor as usize]);
            let spread = std * (1.0 - load * load).sqrt();
            let mut v = centre + spread * rng.normal();
            let mut tries = 0;
            while !(lower..=upper).contains(&v) && tries < 100 {
                v = centre + spread * rng.normal();
                tries += 1;
            }
            v.clamp(lower, upper)
        }
    };
    kind.round(v).clamp(lower, upper)
}

/// Replaces latent keys in column `j` by grid values assigned by rank, so each
/// grid point receives an equal share of rows.
fn assign_grid_by_rank(raw: &mut Matrix, j: usize, kind: FeatureKind, lower: f64, upper: f64) {
    let step = match kind {
        FeatureKind::MultipleOf(s) => s,
        _ => 1.0,
    };
    let lo = (lower / step).round() as usize;
    let points = (upper / step).round() as usize - lo + 1;
    let n = raw.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.get(a, j).total_cmp(&raw.get(b, j)).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        let slot = rank * points / n;
        raw.set(i, j, (lo + slot) as f64 * step);
    }
}

fn positive_rate(score: &[f64], noise: &[f64], bias: f64) -> f64 {
    let pos = score
        .iter()
        .zip(noise)
        .filter(|(s, e)| sigmoid(*s + *e + bias) >= 0.5)
        .count();
    pos as f64 / score.len() as f64
}

/// Solves for the label bias whose positive rate is closest to target; errors
/// unless that rate lies within ±0.01.
fn calibrate_bias(score: &[f64], noise: &[f64], target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-50.0, 50.0);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let rate = positive_rate(score, noise, mid);
        let gap = (rate - target).abs();
        if gap < best.0 {
            best = (gap, mid);
        }
        if rate == target {
            break;
        }
        if rate < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= 0.01 + 1e-12 {
        Ok(best.1)
    } else {
        Err(Error::Calibration(format!(
            "no label bias reaches positive rate {target} within 0.01 (closest gap {:.4})",
            best.0
        )))
    }
}

pub fn generate_dataset(config: &GeneratorConfig) -> Result<Dataset> {
    Ok(generate_with_truth(config)?.dataset)
}

pub fn generate_with_truth(config: &GeneratorConfig) -> Result<Generated> {
    config.validate()?;
    let schema: ProfileSchema = default_schema();
    let table = feature_table();
    debug_assert_eq!(table.len(), schema.len());
    let mut rng = Rand::new(config.seed);
    let n = config.n_samples;
    let d = schema.len();

    let mut raw = Matrix::zeros(n, d);
    for i in 0..n {
        let class_sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        let factors = [rng.normal(), rng.normal(), rng.normal()];
        let row = raw.row_mut(i);
        for (j, (f, (draw, _))) in schema.features().iter().zip(&table).enumerate() {
            row[j] = draw_value(
                draw,
                f.kind,
                f.lower_bound,
                f.upper_bound,
                class_sign,
                &factors,
                &mut rng,
            );
        }
    }
    for (j, (f, (draw, _))) in schema.features().iter().zip(&table).enumerate() {
        if matches!(draw, Draw::Grid(..)) {
            assign_grid_by_rank(&mut raw, j, f.kind, f.lower_bound, f.upper_bound);
        }
    }

    // Hidden score over column-standardized features, rescaled to unit variance.
    let mut col_stats = Vec::with_capacity(d);
    for j in 0..d {
        let mean = raw.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = raw.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        col_stats.push((mean, if var > 0.0 { var.sqrt() } else { 1.0 }));
    }
    let mut score: Vec<f64> = raw
        .iter_rows()
        .map(|r| {
            r.iter()
                .zip(&col_stats)
                .zip(&table)
                .map(|((v, (m, s)), (_, w))| w * (v - m) / s)
                .sum()
        })
        .collect();
    let mean = score.iter().sum::<f64>() / n as f64;
    let sd = (score.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    for s in &mut score {
        *s = (*s - mean) / sd;
    }

    let noise: Vec<f64> = (0..n).map(|_| config.label_noise_std * rng.normal()).collect();
    let bias = calibrate_bias(&score, &noise, config.target_positive_rate)?;
    let labels: Vec<u8> = score
        .iter()
        .zip(&noise)
        .map(|(s, e)| u8::from(sigmoid(s + e + bias) >= 0.5))
        .collect();
    let bayes_labels = score.iter().map(|s| u8::from(s + bias >= 0.0)).collect();

    Ok(Generated {
        dataset: Dataset::from_raw(schema, raw, labels)?,
        bayes_labels,
        bias,
    })
}
