//! Feature schema and the constraint operations every counterfactual passes
//! through: immutable masking, discrete rounding and bound clamping.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// Grid alignment tolerance for `multiple_of` bounds.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Integer,
    MultipleOf(f64),
}

impl FeatureKind {
    /// Rounds to the kind's grid, ties away from zero.
    pub fn round(self, v: f64) -> f64 {
        match self {
            FeatureKind::Continuous => v,
            FeatureKind::Integer => v.round(),
            FeatureKind::MultipleOf(step) => (v / step).round() * step,
        }
    }

    pub fn admits(self, v: f64) -> bool {
        v.is_finite() && self.round(v) == v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub mutable: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<NormStats>,
}

impl FeatureSpec {
    pub fn new(name: &str, kind: FeatureKind, mutable: bool, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind,
            mutable,
            lower_bound: lower,
            upper_bound: upper,
            stats: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::schema("feature with empty name"));
        }
        if !(self.lower_bound <= self.upper_bound) {
            return Err(Error::schema(format!(
                "feature `{}` has lower bound {} above upper bound {}",
                self.name, self.lower_bound, self.upper_bound
            )));
        }
        if let FeatureKind::MultipleOf(step) = self.kind {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::schema(format!("feature `{}` has step {step}", self.name)));
            }
            for b in [self.lower_bound, self.upper_bound] {
                let k = b / step;
                if (k - k.round()).abs() > GRID_TOLERANCE {
                    return Err(Error::schema(format!(
                        "bound {b} of `{}` is not a multiple of {step}",
                        self.name
                    )));
                }
            }
        }
        if let Some(s) = self.stats {
            if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(Error::schema(format!(
                    "feature `{}` has invalid normalization stats {s:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, v: f64) -> bool {
        v >= self.lower_bound && v <= self.upper_bound
    }
}

/// Profile in raw units, one value per schema feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawProfile(pub Vec<f64>);

/// Profile z-scored with the schema's fitted stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedProfile(pub Vec<f64>);

impl RawProfile {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl NormalizedProfile {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSchema {
    version: u32,
    features: Vec<FeatureSpec>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct SchemaFile {
    version: u32,
    features: Vec<FeatureSpec>,
}

impl<'de> Deserialize<'de> for ProfileSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = SchemaFile::deserialize(d)?;
        if file.version != SCHEMA_FORMAT_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported schema version {}",
                file.version
            )));
        }
        ProfileSchema::new(file.features).map_err(serde::de::Error::custom)
    }
}

impl ProfileSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::schema("schema has no features"));
        }
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            f.validate()?;
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::schema(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(Self {
            version: SCHEMA_FORMAT_VERSION,
            features,
            index,
        })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.index.get(name).map(|&i| &self.features[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn mutable_count(&self) -> usize {
        self.features.iter().filter(|f| f.mutable).count()
    }

    pub fn immutable_count(&self) -> usize {
        self.len() - self.mutable_count()
    }

    /// `true` for mutable coordinates.
    pub fn mutable_mask(&self) -> Vec<bool> {
        self.features.iter().map(|f| f.mutable).collect()
    }

    pub fn is_fitted(&self) -> bool {
        self.features.iter().all(|f| f.stats.is_some())
    }

    /// Fits per-feature mean and population std on `raw` rows.
    ///
    /// Constant columns get std 1 so normalization stays defined.
    pub fn fit_stats(&mut self, raw: &Matrix) -> Result<()> {
        if raw.cols() != self.len() {
            return Err(Error::spec(format!(
                "fitting {} columns against a {}-feature schema",
                raw.cols(),
                self.len()
            )));
        }
        if raw.rows() == 0 {
            return Err(Error::spec("cannot fit normalization stats on zero rows"));
        }
        let n = raw.rows() as f64;
        for (j, f) in self.features.iter_mut().enumerate() {
            let mean = raw.iter_rows().map(|r| r[j]).sum::<f64>() / n;
            let var = raw.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = if var > 1e-24 { var.sqrt() } else { 1.0 };
            f.stats = Some(NormStats { mean, std });
        }
        Ok(())
    }

    fn stats(&self) -> Result<Vec<NormStats>> {
        self.features
            .iter()
            .map(|f| {
                f.stats.ok_or_else(|| {
                    Error::spec(format!("normalization stats for `{}` are not fitted", f.name))
                })
            })
            .collect()
    }

    fn check_width(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::schema(format!(
                "profile has {len} values, schema has {} features",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, raw: &RawProfile) -> Result<NormalizedProfile> {
        self.check_width(raw.0.len())?;
        let stats = self.stats()?;
        Ok(NormalizedProfile(
            raw.0
                .iter()
                .zip(&stats)
                .map(|(v, s)| (v - s.mean) / s.std)
                .collect(),
        ))
    }

    pub fn denormalize(&self, norm: &NormalizedProfile) -> Result<RawProfile> {
        self.check_width(norm.0.len())?;
        let stats = self.stats()?;
        Ok(RawProfile(
            norm.0
                .iter()
                .zip(&stats)
                .map(|(v, s)| v * s.std + s.mean)
                .collect(),
        ))
    }

    pub fn normalize_matrix(&self, raw: &Matrix) -> Result<Matrix> {
        self.check_width(raw.cols())?;
        let stats = self.stats()?;
        let mut out = raw.clone();
        for r in 0..out.rows() {
            for (v, s) in out.row_mut(r).iter_mut().zip(&stats) {
                *v = (*v - s.mean) / s.std;
            }
        }
        Ok(out)
    }

    /// Zeroes the immutable coordinates of a residual in place.
    pub fn apply_immutable_mask(&self, residual: &mut [f64]) {
        for (v, f) in residual.iter_mut().zip(&self.features) {
            if !f.mutable {
                *v = 0.0;
            }
        }
    }

    pub fn apply_discrete_rounding(&self, raw: &RawProfile) -> RawProfile {
        RawProfile(
            raw.0
                .iter()
                .zip(&self.features)
                .map(|(&v, f)| f.kind.round(v))
                .collect(),
        )
    }

    pub fn clamp_bounds(&self, raw: &RawProfile) -> RawProfile {
        RawProfile(
            raw.0
                .iter()
                .zip(&self.features)
                .map(|(&v, f)| v.clamp(f.lower_bound, f.upper_bound))
                .collect(),
        )
    }

    /// Names every coordinate that breaks its kind or bounds.
    pub fn violations(&self, raw: &RawProfile) -> Result<Vec<String>> {
        self.check_width(raw.0.len())?;
        let mut out = Vec::new();
        for (&v, f) in raw.0.iter().zip(&self.features) {
            if !v.is_finite() {
                out.push(format!("`{}` is not finite", f.name));
            } else if !f.in_bounds(v) {
                out.push(format!(
                    "`{}` = {v} outside [{}, {}]",
                    f.name, f.lower_bound, f.upper_bound
                ));
            } else if !f.kind.admits(v) {
                out.push(format!("`{}` = {v} is not a valid {:?} value", f.name, f.kind));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("schema", e.to_string()))
    }

    /// Stable content hash (hex SHA-256 prefix) of the schema including stats.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The 33-feature candidate-profile schema: six mutable profile fields and
/// twenty-seven immutable education, history and marketplace features.
pub fn default_schema() -> ProfileSchema {
    use FeatureKind::*;
    let mut features = vec![
        FeatureSpec::new("expected_salary", MultipleOf(5000.0), true, 60_000.0, 300_000.0),
        FeatureSpec::new("headline_word_count", Integer, true, 0.0, 30.0),
        FeatureSpec::new("experience_relevance_score", Continuous, true, 0.0, 3.0),
        FeatureSpec::new("work_experience_avg_word_count", Continuous, true, 0.0, 200.0),
        FeatureSpec::new("verified_years_of_experience", Continuous, true, 0.0, 45.0),
        FeatureSpec::new("skills_popularity_score", Continuous, true, 0.0, 3.0),
    ];
    for name in BINARY_FEATURES {
        features.push(FeatureSpec::new(name, Integer, false, 0.0, 1.0));
    }
    for name in COUNT_FEATURES {
        features.push(FeatureSpec::new(name, Integer, false, 0.0, 50.0));
    }
    for name in MARKET_FEATURES {
        features.push(FeatureSpec::new(name, Continuous, false, -3.0, 3.0));
    }
    ProfileSchema::new(features).expect("default schema is valid")
}

pub(crate) const BINARY_FEATURES: [&str; 7] = [
    "has_phd",
    "has_masters_degree",
    "has_bachelors_degree",
    "open_to_remote",
    "requires_visa_sponsorship",
    "has_github_profile",
    "has_portfolio_link",
];

pub(crate) const COUNT_FEATURES: [&str; 10] = [
    "num_skills_listed",
    "num_prior_employers",
    "num_education_entries",
    "num_certifications",
    "num_languages",
    "num_projects",
    "num_profile_views",
    "num_recruiter_searches",
    "num_applications_submitted",
    "weeks_since_registration",
];

pub(crate) const MARKET_FEATURES: [&str; 10] = [
    "market_demand_index",
    "role_supply_index",
    "salary_band_percentile_z",
    "location_demand_z",
    "seasonal_hiring_index",
    "role_competition_z",
    "marketplace_activity_z",
    "employer_interest_z",
    "response_rate_z",
    "profile_completeness_z",
];
