//! The five-metric comparison of the three generators over a test split,
//! with latency measurement, confidence intervals and report rendering.
//!
//! Non-timing metrics are computed in normalized space and depend only on
//! the input row and its counterfactual.

mod latency;
mod metrics;
mod report;
mod run;
mod stats;

pub use latency::{
    measure_batch_latency, measure_batch_latency_with, measure_latency, measure_latency_with,
    Clock, MonotonicClock, Timed, DEFAULT_WARMUP,
};
pub use metrics::{actionability_metric, prediction_gain, realism_metric};
pub use report::{
    csv_rows, export_csv, parse_report_csv, render_diff, render_examples, render_table,
    report_csv, BenchmarkReport, CsvRow, DatasetDescriptor, Example, Failure, Metric,
    MethodReport, MetricRecord, RowSelection,
};
pub use run::{run_benchmark, run_benchmark_detailed, BenchmarkConfig, BenchmarkModels, BenchmarkRun};
pub use stats::ci95;
