use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::ci95;
use crate::engines::{FeedbackDiff, Method};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::predictors::DECISION_THRESHOLD;
use crate::profiles::{FeatureKind, ProfileSchema, RawProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Realism,
    PredictionGain,
    Actionability,
    LatencyMs,
    BatchLatencyS,
}

impl Metric {
    /// Report row order.
    pub const ALL: [Metric; 5] = [
        Metric::Realism,
        Metric::PredictionGain,
        Metric::Actionability,
        Metric::LatencyMs,
        Metric::BatchLatencyS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Realism => "realism",
            Metric::PredictionGain => "prediction_gain",
            Metric::Actionability => "actionability",
            Metric::LatencyMs => "latency_ms",
            Metric::BatchLatencyS => "batch_latency_s",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Realism => "Realism",
            Metric::PredictionGain => "Prediction gain",
            Metric::Actionability => "Actionability",
            Metric::LatencyMs => "Latency (ms)",
            Metric::BatchLatencyS => "Batch latency (s)",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Metric::Realism => "‖AE(x_cf) − x_cf‖₂²",
            Metric::PredictionGain => "C(x_cf) − C(x)",
            Metric::Actionability => "‖x_cf − x‖₁",
            Metric::LatencyMs | Metric::BatchLatencyS => "-",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::PredictionGain
    }

    pub fn is_timing(self) -> bool {
        matches!(self, Metric::LatencyMs | Metric::BatchLatencyS)
    }

    fn decimals(self) -> usize {
        match self {
            Metric::LatencyMs => 3,
            _ => 4,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::format("metric", format!("unknown metric `{s}`")))
    }
}

/// One metric for one method. Batch latency is a scalar with no per-sample
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: Metric,
    pub values: Vec<f64>,
    pub mean: f64,
    pub ci_half_width: f64,
    pub n: usize,
}

impl MetricRecord {
    pub fn from_values(metric: Metric, values: Vec<f64>) -> Self {
        let (mean, ci_half_width) = ci95(&values);
        let n = values.len();
        Self {
            metric,
            values,
            mean,
            ci_half_width,
            n,
        }
    }

    pub fn scalar(metric: Metric, value: f64, n: usize) -> Self {
        Self {
            metric,
            values: Vec::new(),
            mean: value,
            ci_half_width: 0.0,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Test-row index of each successful sample, paired with every
    /// per-sample metric vector.
    pub rows: Vec<usize>,
    pub metrics: Vec<MetricRecord>,
    pub failures: Vec<Failure>,
}

impl MethodReport {
    pub fn metric(&self, metric: Metric) -> &MetricRecord {
        self.metrics
            .iter()
            .find(|r| r.metric == metric)
            .expect("every method report holds all five metrics")
    }

    pub fn successes(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    /// Every test row.
    All,
    /// Only rows the classifier rejects (score below the decision threshold).
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    /// Rows the methods were run on.
    pub n: usize,
    pub test_rows: usize,
    pub data_seed: u64,
    pub split_seed: u64,
    pub selection: RowSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub methods: BTreeMap<Method, MethodReport>,
    pub dataset: DatasetDescriptor,
    pub classifier_accuracy: f64,
    pub timestamp_unix_s: u64,
}

impl BenchmarkReport {
    pub fn method(&self, method: Method) -> &MethodReport {
        &self.methods[&method]
    }

    pub fn mean(&self, method: Method, metric: Metric) -> f64 {
        self.method(method).metric(metric).mean
    }

    /// Checks the structural invariants: three methods, five metrics each,
    /// paired per-sample vectors and complete failure accounting.
    pub fn validate(&self) -> Result<()> {
        for method in Method::ALL {
            let m = self
                .methods
                .get(&method)
                .ok_or_else(|| Error::spec(format!("report lacks method {method}")))?;
            if m.method != method {
                return Err(Error::spec(format!("report entry {method} holds {}", m.method)));
            }
            if m.successes() + m.failures.len() != self.dataset.n {
                return Err(Error::spec(format!(
                    "{method}: {} successes + {} failures != {} rows",
                    m.successes(),
                    m.failures.len(),
                    self.dataset.n
                )));
            }
            let found: Vec<Metric> = m.metrics.iter().map(|r| r.metric).collect();
            if found != Metric::ALL {
                return Err(Error::spec(format!("{method}: metrics {found:?}")));
            }
            for r in &m.metrics {
                if !(r.ci_half_width >= 0.0) {
                    return Err(Error::spec(format!("{method}/{}: negative CI", r.metric.as_str())));
                }
                if r.metric != Metric::BatchLatencyS && r.values.len() != m.rows.len() {
                    return Err(Error::spec(format!(
                        "{method}/{}: {} values for {} rows",
                        r.metric.as_str(),
                        r.values.len(),
                        m.rows.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The report with every timing-dependent field zeroed, for comparing
    /// runs.
    pub fn without_timing(&self) -> BenchmarkReport {
        let mut out = self.clone();
        out.timestamp_unix_s = 0;
        for m in out.methods.values_mut() {
            for r in &mut m.metrics {
                if r.metric.is_timing() {
                    r.values.iter_mut().for_each(|v| *v = 0.0);
                    r.mean = 0.0;
                    r.ci_half_width = 0.0;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_cell(r: &MetricRecord) -> String {
    if !r.mean.is_finite() {
        return "n/a".to_string();
    }
    let d = r.metric.decimals();
    if r.metric == Metric::BatchLatencyS {
        format!("{:.*}", d, r.mean)
    } else {
        format!("{:.*} ± {:.*}", d, r.mean, d, r.ci_half_width)
    }
}

/// Markdown metric table: one row per metric, one column per method,
/// `mean ± half_width` cells and the best mean of each row in bold.
pub fn render_table(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    out.push_str("| Metric | Formula |");
    for m in Method::ALL {
        let _ = write!(out, " {} |", m.label());
    }
    out.push_str("\n|:---|:---:|");
    for _ in Method::ALL {
        out.push_str("---:|");
    }
    out.push('\n');
    for metric in Metric::ALL {
        let (arrow, note) = if metric.higher_is_better() {
            ("↑", "higher is better")
        } else {
            ("↓", "lower is better")
        };
        let records: Vec<&MetricRecord> = Method::ALL
            .iter()
            .map(|&m| report.method(m).metric(metric))
            .collect();
        let finite = records.iter().map(|r| r.mean).filter(|v| v.is_finite());
        let best = if metric.higher_is_better() {
            finite.fold(f64::NEG_INFINITY, f64::max)
        } else {
            finite.fold(f64::INFINITY, f64::min)
        };
        let _ = write!(out, "| {arrow} {} ({note}) | {} |", metric.label(), metric.formula());
        for r in records {
            let cell = fmt_cell(r);
            if r.mean == best {
                let _ = write!(out, " **{cell}** |");
            } else {
                let _ = write!(out, " {cell} |");
            }
        }
        out.push('\n');
    }
    let d = &report.dataset;
    let selection = match d.selection {
        RowSelection::All => "all",
        RowSelection::Rejected => "rejected",
    };
    let _ = writeln!(
        out,
        "\nRows: {} ({selection} of {} test rows; data seed {}, split seed {}). \
         Classifier test accuracy: {:.4}.",
        d.n, d.test_rows, d.data_seed, d.split_seed, report.classifier_accuracy
    );
    let failures: Vec<String> = Method::ALL
        .iter()
        .map(|&m| format!("{} {}", m.label(), report.method(m).failures.len()))
        .collect();
    let _ = writeln!(out, "Failures: {}.", failures.join(", "));
    out
}

fn is_discrete(kind: FeatureKind) -> bool {
    !matches!(kind, FeatureKind::Continuous)
}

fn fmt_value(kind: FeatureKind, v: f64) -> String {
    if is_discrete(kind) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn fmt_delta(kind: FeatureKind, d: f64) -> String {
    if d == 0.0 {
        return if is_discrete(kind) { "0".into() } else { "0.00".into() };
    }
    if is_discrete(kind) {
        format!("{d:+.0}")
    } else {
        format!("{d:+.2}")
    }
}

/// One profile and the diff each method suggests for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: RawProfile,
    pub diffs: Vec<(Method, FeedbackDiff)>,
}

/// Feedback-examples table: initial values, per-method deltas on the
/// mutable features, and a final row of classifier scores.
pub fn render_examples(schema: &ProfileSchema, examples: &[Example]) -> Result<String> {
    let mut out = String::new();
    for (k, ex) in examples.iter().enumerate() {
        if ex.input.0.len() != schema.len() {
            return Err(Error::spec("example profile does not match the schema width"));
        }
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "**Example {}**\n", k + 1);
        out.push_str("| Feature | Init. value |");
        for (m, _) in &ex.diffs {
            let _ = write!(out, " {} |", m.label());
        }
        out.push_str("\n|:---|---:|");
        for _ in &ex.diffs {
            out.push_str("---:|");
        }
        out.push('\n');
        for (j, f) in schema.features().iter().enumerate() {
            if !f.mutable {
                continue;
            }
            let _ = write!(out, "| {} | {} |", f.name, fmt_value(f.kind, ex.input.0[j]));
            for (_, diff) in &ex.diffs {
                let delta = diff
                    .entries
                    .iter()
                    .find(|e| e.feature == f.name)
                    .map_or(0.0, |e| e.delta);
                let _ = write!(out, " {} |", fmt_delta(f.kind, delta));
            }
            out.push('\n');
        }
        let before = ex.diffs.first().map_or(f64::NAN, |(_, d)| d.score_before);
        let _ = write!(out, "| *Classifier prediction score* | *{before:.2}* |");
        for (_, diff) in &ex.diffs {
            let _ = write!(out, " *{:.2}* |", diff.score_after);
        }
        out.push('\n');
    }
    Ok(out)
}

fn verdict(score: f64) -> &'static str {
    if score >= DECISION_THRESHOLD {
        "approved"
    } else {
        "rejected"
    }
}

/// A single suggestion with exact values: `old + delta = new` on every row.
pub fn render_diff(method: Method, diff: &FeedbackDiff) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Method: {}\n", method.label());
    out.push_str("| Feature | Old | Delta | New |\n|:---|---:|---:|---:|\n");
    for e in &diff.entries {
        let sign = if e.delta >= 0.0 { "+" } else { "" };
        let _ = writeln!(out, "| {} | {} | {sign}{} | {} |", e.feature, e.old, e.delta, e.new);
    }
    if diff.entries.is_empty() {
        out.push_str("| (no change) | | | |\n");
    }
    let _ = writeln!(
        out,
        "\nScore: {:.4} ({}) -> {:.4} ({})",
        diff.score_before,
        verdict(diff.score_before),
        diff.score_after,
        verdict(diff.score_after)
    );
    out
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: Method,
    pub metric: Metric,
    pub mean: f64,
    pub ci_half_width: f64,
    pub n: usize,
    pub failures: usize,
}

pub fn csv_rows(report: &BenchmarkReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for m in Method::ALL {
        let mr = report.method(m);
        for r in &mr.metrics {
            rows.push(CsvRow {
                method: m,
                metric: r.metric,
                mean: r.mean,
                ci_half_width: r.ci_half_width,
                n: r.n,
                failures: mr.failures.len(),
            });
        }
    }
    rows
}

pub fn report_csv(report: &BenchmarkReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in csv_rows(report) {
        w.serialize(row).expect("csv row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

pub fn export_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    write_atomic(path, report_csv(report).as_bytes())
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::format("header", e.to_string()))?
        .clone();
    let expected = ["method", "metric", "mean", "ci_half_width", "n", "failures"];
    if header.iter().ne(expected) {
        return Err(Error::format(
            "header",
            format!("expected {}", expected.join(",")),
        ));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                row: i + 1,
                column: String::new(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::engines::DiffEntry;
    use crate::profiles::default_schema;

    /// A fixed report with hand-picked numbers; feeds the golden snapshot.
    pub(crate) fn synthetic_report() -> BenchmarkReport {
        let mut methods = BTreeMap::new();
        let table: [(Method, [f64; 3], f64, f64); 3] = [
            (Method::Rgd, [1.1, 0.4, 1.3], 1700.0, 1.03),
            (Method::Csgp, [0.7, 0.07, 0.16], 7700.0, 4.67),
            (Method::Countergan, [0.68, 0.08, 0.45], 1.5, 0.03),
        ];
        for (k, (method, base, latency, batch)) in table.into_iter().enumerate() {
            let rows: Vec<usize> = (0..4).filter(|&r| !(k == 1 && r == 2)).collect();
            let spread = |b: f64| -> Vec<f64> {
                rows.iter().map(|&r| b + 0.01 * (r as f64 - 1.5)).collect()
            };
            let metrics = vec![
                MetricRecord::from_values(Metric::Realism, spread(base[0])),
                MetricRecord::from_values(Metric::PredictionGain, spread(base[1])),
                MetricRecord::from_values(Metric::Actionability, spread(base[2])),
                MetricRecord::from_values(Metric::LatencyMs, spread(latency)),
                MetricRecord::scalar(Metric::BatchLatencyS, batch, 4),
            ];
            let failures = if k == 1 {
                vec![Failure {
                    row: 2,
                    message: "numeric error: stub".into(),
                }]
            } else {
                vec![]
            };
            methods.insert(
                method,
                MethodReport {
                    method,
                    rows,
                    metrics,
                    failures,
                },
            );
        }
        BenchmarkReport {
            methods,
            dataset: DatasetDescriptor {
                n: 4,
                test_rows: 4,
                data_seed: 42,
                split_seed: 42,
                selection: RowSelection::All,
            },
            classifier_accuracy: 0.764,
            timestamp_unix_s: 1_700_000_000,
        }
    }

    #[test]
    fn synthetic_report_is_valid() {
        let r = synthetic_report();
        r.validate().unwrap();
        for m in r.methods.values() {
            for rec in &m.metrics {
                if rec.metric != Metric::BatchLatencyS {
                    let naive = rec.values.iter().sum::<f64>() / rec.values.len() as f64;
                    assert!((naive - rec.mean).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn validate_catches_broken_accounting() {
        let mut r = synthetic_report();
        r.methods.get_mut(&Method::Csgp).unwrap().failures.clear();
        assert!(r.validate().is_err());
        let mut r = synthetic_report();
        r.methods.remove(&Method::Rgd);
        assert!(r.validate().is_err());
    }

    #[test]
    fn realism_row_is_marked_lower_is_better() {
        let t = render_table(&synthetic_report());
        let row = t.lines().find(|l| l.contains("Realism")).unwrap();
        assert!(row.contains("↓") && row.contains("lower is better"));
        let gain = t.lines().find(|l| l.contains("Prediction gain")).unwrap();
        assert!(gain.contains("↑"));
        assert!(gain.contains("**0.4000 ± "));
    }

    #[test]
    fn csv_round_trip_recovers_means() {
        let r = synthetic_report();
        let rows = parse_report_csv(&report_csv(&r)).unwrap();
        assert_eq!(rows.len(), 15);
        assert_eq!(rows, csv_rows(&r));
        for row in &rows {
            assert!((row.mean - r.mean(row.method, row.metric)).abs() <= 1e-9);
        }
        assert_eq!(rows.iter().filter(|c| c.method == Method::Csgp).all(|c| c.failures == 1), true);
    }

    #[test]
    fn csv_export_writes_the_same_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let r = synthetic_report();
        export_csv(&r, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), report_csv(&r));
    }

    #[test]
    fn csv_with_wrong_header_is_rejected() {
        assert!(parse_report_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn without_timing_erases_only_timing() {
        let r = synthetic_report();
        let t = r.without_timing();
        assert_eq!(t.mean(Method::Rgd, Metric::LatencyMs), 0.0);
        assert_eq!(t.mean(Method::Rgd, Metric::BatchLatencyS), 0.0);
        assert_eq!(t.mean(Method::Rgd, Metric::Realism), r.mean(Method::Rgd, Metric::Realism));
    }

    fn salary_example() -> Example {
        let s = default_schema();
        let mut v: Vec<f64> = s.features().iter().map(|f| f.lower_bound).collect();
        v[0] = 165_000.0;
        let diff = |delta: f64, after: f64| FeedbackDiff {
            entries: vec![DiffEntry {
                feature: "expected_salary".into(),
                old: 165_000.0,
                delta,
                new: 165_000.0 + delta,
            }],
            score_before: 0.35,
            score_after: after,
        };
        Example {
            input: RawProfile(v),
            diffs: vec![
                (Method::Rgd, diff(185_000.0, 0.97)),
                (Method::Csgp, diff(5_000.0, 0.50)),
                (Method::Countergan, diff(15_000.0, 0.72)),
            ],
        }
    }

    #[test]
    fn examples_table_has_mutable_rows_and_scores() {
        let s = default_schema();
        let t = render_examples(&s, &[salary_example()]).unwrap();
        assert!(t.contains("| expected_salary | 165000 | +185000 | +5000 | +15000 |"), "{t}");
        assert!(t.contains("| *Classifier prediction score* | *0.35* | *0.97* | *0.50* | *0.72* |"));
        let body_rows = t.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Feature")).count();
        assert_eq!(body_rows, s.mutable_count() + 1);
    }

    #[test]
    fn single_diff_rendering_is_exact() {
        let (_, d) = salary_example().diffs.remove(2);
        let t = render_diff(Method::Countergan, &d);
        assert!(t.contains("| expected_salary | 165000 | +15000 | 180000 |"), "{t}");
        assert!(t.contains("0.3500 (rejected) -> 0.7200 (approved)"));
    }

    /// Compares against the checked-in snapshot; `UPDATE_GOLDEN=1` rewrites it.
    fn check_golden(name: &str, rendered: &str) {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, rendered).unwrap();
        }
        let stored = std::fs::read_to_string(&path).unwrap();
        assert_eq!(rendered, stored, "{} is stale", path.display());
    }

    #[test]
    fn table_matches_golden_snapshot() {
        check_golden("benchmark_table.md", &render_table(&synthetic_report()));
    }

    #[test]
    fn examples_match_golden_snapshot() {
        let rendered = render_examples(&default_schema(), &[salary_example()]).unwrap();
        check_golden("examples_table.md", &rendered);
    }
}
