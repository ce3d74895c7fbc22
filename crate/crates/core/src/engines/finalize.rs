use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::ClassifierModel;
use crate::profiles::{NormalizedProfile, ProfileSchema, RawProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rgd,
    Csgp,
    Countergan,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rgd, Method::Csgp, Method::Countergan];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rgd => "rgd",
            Method::Csgp => "csgp",
            Method::Countergan => "countergan",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Rgd => "RGD",
            Method::Csgp => "CSGP",
            Method::Countergan => "CounteRGAN",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgd" => Ok(Method::Rgd),
            "csgp" => Ok(Method::Csgp),
            "countergan" => Ok(Method::Countergan),
            other => Err(Error::spec(format!(
                "unknown method `{other}` (expected rgd, csgp or countergan)"
            ))),
        }
    }
}

/// A finalized counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    pub method: Method,
    pub x_cf_raw: RawProfile,
    pub x_cf: NormalizedProfile,
    /// `x_cf - x` in normalized space.
    pub residual: Vec<f64>,
    pub score_before: f64,
    pub score_after: f64,
    pub iterations: usize,
    pub elapsed: Duration,
    /// Prediction-loss value after each accepted step, when requested.
    pub trace: Option<Vec<f64>>,
}

/// Smallest adjustment of `new` such that `old + (new - old) == new` holds
/// exactly in floating point, so feedback deltas replay bit-for-bit.
pub(crate) fn snap_to_exact_delta(old: f64, new: f64) -> f64 {
    let mut v = new;
    for _ in 0..8 {
        let replay = old + (v - old);
        if replay == v {
            return v;
        }
        v = replay;
    }
    v
}

/// Turns a normalized candidate into a deliverable profile.
///
/// Denormalizes, restores every immutable coordinate to the input's raw
/// value, rounds discrete features, optionally clamps to bounds, then
/// re-normalizes and scores. Coordinates the candidate left untouched keep
/// the input's raw value exactly.
pub fn finalize(
    input: &RawProfile,
    candidate: &[f64],
    schema: &ProfileSchema,
    classifier: &ClassifierModel,
    enforce_bounds: bool,
    method: Method,
) -> Result<CfResult> {
    if candidate.len() != schema.len() || input.values().len() != schema.len() {
        return Err(Error::spec(format!(
            "candidate width {} / input width {} do not match schema width {}",
            candidate.len(),
            input.values().len(),
            schema.len()
        )));
    }
    if let Some(j) = candidate.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "candidate coordinate `{}` is not finite",
            schema.features()[j].name
        )));
    }
    let x_norm = schema.normalize(input)?;
    let mut raw = schema.denormalize(&NormalizedProfile(candidate.to_vec()))?;
    for (j, f) in schema.features().iter().enumerate() {
        if !f.mutable || candidate[j] == x_norm.values()[j] {
            raw.0[j] = input.values()[j];
        }
    }
    raw = schema.apply_discrete_rounding(&raw);
    if enforce_bounds {
        raw = schema.clamp_bounds(&raw);
    }
    for (j, f) in schema.features().iter().enumerate() {
        let old = input.values()[j];
        raw.0[j] = if f.mutable {
            snap_to_exact_delta(old, raw.0[j])
        } else {
            old
        };
    }
    let x_cf = schema.normalize(&raw)?;
    let score_before = classifier.predict(&x_norm)?;
    let score_after = classifier.predict(&x_cf)?;
    let residual = x_cf
        .values()
        .iter()
        .zip(x_norm.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(CfResult {
        method,
        x_cf_raw: raw,
        x_cf,
        residual,
        score_before,
        score_after,
        iterations: 0,
        elapsed: Duration::ZERO,
        trace: None,
    })
}
