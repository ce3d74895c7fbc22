//! Mean-reduced losses returning the gradient with respect to the prediction.

use super::Matrix;
use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

fn check_shapes(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::spec(format!(
            "prediction shape {:?} does not match target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.as_slice().is_empty() {
        return Err(Error::spec("loss over an empty batch"));
    }
    Ok(())
}

/// Binary cross-entropy averaged over every entry.
pub fn bce_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check_shapes(pred, target)?;
    let n = pred.as_slice().len() as f64;
    let mut loss = 0.0;
    let grad = pred.zip_with(target, |p, y| {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        (p - y) / (p * (1.0 - p)) / n
    })?;
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::numeric("binary cross-entropy is not finite"));
    }
    Ok((loss, grad))
}

/// Squared error averaged over every entry.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check_shapes(pred, target)?;
    let n = pred.as_slice().len() as f64;
    let mut loss = 0.0;
    let grad = pred.zip_with(target, |p, t| {
        let d = p - t;
        loss += d * d;
        2.0 * d / n
    })?;
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::numeric("mean squared error is not finite"));
    }
    Ok((loss, grad))
}
