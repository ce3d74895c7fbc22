use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use web_time::{SystemTime, UNIX_EPOCH};

use super::latency::{measure_batch_latency, measure_latency, Timed, DEFAULT_WARMUP};
use super::metrics::{actionability_metric, prediction_gain, realism_metric};
use super::report::{
    BenchmarkReport, DatasetDescriptor, Failure, Metric, MethodReport, MetricRecord, RowSelection,
};
use crate::engines::{
    countergan_generate, countergan_generate_batch, csgp_generate, rgd_generate, CfResult,
    CsgpConfig, GanModels, Method, RgdConfig,
};
use crate::error::{Error, Result};
use crate::predictors::{AutoencoderModel, ClassifierModel, PrototypeSet, DECISION_THRESHOLD};
use crate::profiles::Dataset;

/// Trained artifacts the benchmark runs against.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkModels<'a> {
    pub classifier: &'a ClassifierModel,
    pub ae: &'a AutoencoderModel,
    pub prototypes: &'a PrototypeSet,
    pub gan: &'a GanModels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub rgd: RgdConfig,
    pub csgp: CsgpConfig,
    pub warmup: usize,
    pub selection: RowSelection,
    /// Recorded in the report's dataset descriptor.
    pub data_seed: u64,
    pub split_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            rgd: RgdConfig::default(),
            csgp: CsgpConfig::default(),
            warmup: DEFAULT_WARMUP,
            selection: RowSelection::All,
            data_seed: 0,
            split_seed: 0,
        }
    }
}

/// A report plus the counterfactuals behind it.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    /// Test-row index of each evaluated input.
    pub rows: Vec<usize>,
    /// Per method, one entry per evaluated input; `None` marks a failure.
    pub results: BTreeMap<Method, Vec<Option<CfResult>>>,
}

pub fn run_benchmark(
    models: BenchmarkModels<'_>,
    config: &BenchmarkConfig,
    test: &Dataset,
) -> Result<BenchmarkReport> {
    Ok(run_benchmark_detailed(models, config, test)?.report)
}

fn check_schemas(models: &BenchmarkModels<'_>, test: &Dataset) -> Result<()> {
    let expected = models.classifier.schema.hash();
    for (what, hash) in [
        ("autoencoder", models.ae.schema.hash()),
        ("generator", models.gan.schema.hash()),
        ("test data", test.schema().hash()),
    ] {
        if hash != expected {
            return Err(Error::spec(format!(
                "{what} schema {hash} differs from the classifier schema {expected}"
            )));
        }
    }
    Ok(())
}

pub fn run_benchmark_detailed(
    models: BenchmarkModels<'_>,
    config: &BenchmarkConfig,
    test: &Dataset,
) -> Result<BenchmarkRun> {
    config.rgd.validate()?;
    config.csgp.validate()?;
    check_schemas(&models, test)?;
    let classifier = models.classifier;
    let classifier_accuracy = classifier.accuracy(test)?;

    let rows: Vec<usize> = match config.selection {
        RowSelection::All => (0..test.len()).collect(),
        RowSelection::Rejected => {
            let scores = classifier.predict_batch(test.rows())?;
            (0..test.len())
                .filter(|&i| scores[i] < DECISION_THRESHOLD)
                .collect()
        }
    };
    let inputs: Vec<_> = rows.iter().map(|&i| test.raw_profile(i)).collect();

    let mut methods = BTreeMap::new();
    let mut results = BTreeMap::new();
    for method in Method::ALL {
        let timed: Timed<CfResult> = match method {
            Method::Rgd => measure_latency(
                |x| rgd_generate(classifier, x, &config.rgd),
                &inputs,
                config.warmup,
            )?,
            Method::Csgp => measure_latency(
                |x| csgp_generate(classifier, models.ae, models.prototypes, x, &config.csgp),
                &inputs,
                config.warmup,
            )?,
            Method::Countergan => measure_latency(
                |x| countergan_generate(models.gan, classifier, x),
                &inputs,
                config.warmup,
            )?,
        };
        // Iterative methods loop sequentially over the split, so their batch
        // time is the timed loop itself; CounteRGAN runs one batched pass.
        let batch_s = match method {
            Method::Countergan => {
                measure_batch_latency(
                    || countergan_generate_batch(models.gan, classifier, &inputs),
                    config.warmup,
                )?
                .1
            }
            _ => timed.total,
        }
        .as_secs_f64();

        let mut ok_rows = Vec::new();
        let mut failures = Vec::new();
        let mut per: [Vec<f64>; 4] = Default::default();
        let mut kept = Vec::with_capacity(inputs.len());
        for ((k, out), ms) in timed.outputs.into_iter().enumerate().zip(timed.per_sample_ms) {
            let row = rows[k];
            let scored = out.and_then(|r| {
                let realism = realism_metric(models.ae, &r)?;
                let action = actionability_metric(&test.normalized_profile(row), &r)?;
                Ok((r, realism, action))
            });
            match scored {
                Ok((r, realism, action)) => {
                    ok_rows.push(row);
                    per[0].push(realism);
                    per[1].push(prediction_gain(&r));
                    per[2].push(action);
                    per[3].push(ms);
                    kept.push(Some(r));
                }
                Err(e) => {
                    failures.push(Failure {
                        row,
                        message: e.to_string(),
                    });
                    kept.push(None);
                }
            }
        }
        let [realism, gain, action, latency] = per;
        let metrics = vec![
            MetricRecord::from_values(Metric::Realism, realism),
            MetricRecord::from_values(Metric::PredictionGain, gain),
            MetricRecord::from_values(Metric::Actionability, action),
            MetricRecord::from_values(Metric::LatencyMs, latency),
            MetricRecord::scalar(Metric::BatchLatencyS, batch_s, inputs.len()),
        ];
        methods.insert(
            method,
            MethodReport {
                method,
                rows: ok_rows,
                metrics,
                failures,
            },
        );
        results.insert(method, kept);
    }

    let report = BenchmarkReport {
        methods,
        dataset: DatasetDescriptor {
            n: rows.len(),
            test_rows: test.len(),
            data_seed: config.data_seed,
            split_seed: config.split_seed,
            selection: config.selection,
        },
        classifier_accuracy,
        timestamp_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    report.validate()?;
    Ok(BenchmarkRun {
        report,
        rows,
        results,
    })
}
