//! In-browser demo: trains a small classifier and CounteRGAN on synthetic
//! profiles, then scores edited profiles and proposes counterfactuals.
//!
//! [`Session`] holds all logic and is plain Rust so it can be tested
//! natively; the `bindings` module only wraps it for JavaScript. Every
//! payload crossing the boundary is a JSON string.

use recourse_core::engines::{
    countergan_generate, countergan_train, make_diff, rgd_generate, CfResult, CounterganConfig,
    GanModels, Method, RgdConfig,
};
use recourse_core::predictors::{train_classifier, ClassifierModel, TrainConfig, DECISION_THRESHOLD};
use recourse_core::profiles::{
    generate_dataset, parse_profile_json, profile_to_map, split, Dataset, GeneratorConfig,
};
use recourse_core::{Rand, Result};
use serde_json::{json, Value};

#[cfg(target_arch = "wasm32")]
mod bindings;

/// Training budget; small enough to finish in a page load.
#[derive(Debug, Clone, Copy)]
pub struct DemoConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub classifier_epochs: usize,
    pub gan_steps: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_samples: 1200,
            seed: 42,
            classifier_epochs: 60,
            gan_steps: 600,
        }
    }
}

pub struct Session {
    classifier: ClassifierModel,
    gan: GanModels,
    test: Dataset,
    test_accuracy: f64,
}

impl Session {
    pub fn train(config: DemoConfig) -> Result<Session> {
        let data = generate_dataset(&GeneratorConfig {
            n_samples: config.n_samples,
            seed: config.seed,
            ..GeneratorConfig::default()
        })?;
        let (train, test) = split(&data, 0.8, &mut Rand::new(config.seed))?;
        let (classifier, report) = train_classifier(
            &train,
            &test,
            &TrainConfig {
                epochs: config.classifier_epochs,
                ..TrainConfig::classifier_default()
            },
        )?;
        let gan = countergan_train(
            &classifier,
            &train,
            &CounterganConfig {
                steps: config.gan_steps,
                ..CounterganConfig::for_width(train.schema().len())
            },
        )?;
        Ok(Session {
            classifier,
            gan,
            test,
            test_accuracy: report.test_accuracy,
        })
    }

    pub fn test_accuracy(&self) -> f64 {
        self.test_accuracy
    }

    /// Feature list with kinds, bounds and mutability, for building the form.
    pub fn schema_json(&self) -> String {
        let features: Vec<Value> = self
            .classifier
            .schema
            .features()
            .iter()
            .map(|f| {
                json!({
                    "name": f.name,
                    "kind": f.kind,
                    "mutable": f.mutable,
                    "lower": f.lower_bound,
                    "upper": f.upper_bound,
                })
            })
            .collect();
        json!({ "features": features, "test_accuracy": self.test_accuracy }).to_string()
    }

    /// The `k`-th test profile the classifier rejects, wrapping around.
    pub fn rejected_profile_json(&self, k: usize) -> Result<String> {
        let scores = self.classifier.predict_batch(self.test.rows())?;
        let rejected: Vec<usize> = (0..self.test.len())
            .filter(|&i| scores[i] < DECISION_THRESHOLD)
            .collect();
        let i = if rejected.is_empty() {
            k % self.test.len()
        } else {
            rejected[k % rejected.len()]
        };
        let raw = self.test.raw_profile(i);
        Ok(Value::Object(profile_to_map(&raw, &self.classifier.schema)).to_string())
    }

    pub fn score_json(&self, profile: &str) -> Result<String> {
        let schema = &self.classifier.schema;
        let (raw, _) = parse_profile_json(profile, schema)?;
        let score = self.classifier.predict(&schema.normalize(&raw)?)?;
        Ok(json!({ "score": score, "approved": score >= DECISION_THRESHOLD }).to_string())
    }

    /// Suggested edits from `method` ("countergan" or "rgd").
    pub fn counterfactual_json(&self, profile: &str, method: &str) -> Result<String> {
        let schema = &self.classifier.schema;
        let (raw, _) = parse_profile_json(profile, schema)?;
        let method: Method = method.parse()?;
        let result: CfResult = match method {
            Method::Countergan => countergan_generate(&self.gan, &self.classifier, &raw)?,
            Method::Rgd => rgd_generate(&self.classifier, &raw, &RgdConfig::default())?,
            Method::Csgp => {
                return Err(recourse_core::Error::Spec(
                    "the demo trains no autoencoder; use rgd or countergan".into(),
                ))
            }
        };
        let diff = make_diff(&raw, &result, schema)?;
        Ok(json!({
            "method": method.label(),
            "diff": diff.entries,
            "score_before": diff.score_before,
            "score_after": diff.score_after,
            "approved_after": diff.score_after >= DECISION_THRESHOLD,
            "counterfactual": profile_to_map(&result.x_cf_raw, schema),
            "elapsed_ms": result.elapsed.as_secs_f64() * 1e3,
        })
        .to_string())
    }
}
