use crate::engines::CfResult;
use crate::error::{Error, Result};
use crate::predictors::AutoencoderModel;
use crate::profiles::NormalizedProfile;

/// `|AE(x_cf) - x_cf|_2^2` on the normalized counterfactual.
pub fn realism_metric(ae: &AutoencoderModel, result: &CfResult) -> Result<f64> {
    ae.reconstruction_error(result.x_cf.values())
}

/// `C(x_cf) - C(x)`.
pub fn prediction_gain(result: &CfResult) -> f64 {
    result.score_after - result.score_before
}

/// `|x_cf - x|_1` in normalized space.
pub fn actionability_metric(x: &NormalizedProfile, result: &CfResult) -> Result<f64> {
    let (a, b) = (x.values(), result.x_cf.values());
    if a.len() != b.len() {
        return Err(Error::spec(format!(
            "actionability on vectors of width {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(u, v)| (v - u).abs()).sum())
}
