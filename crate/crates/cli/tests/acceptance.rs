//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs the real `recourse` binary for every pipeline step.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use recourse_core::benchmark::{
    realism_metric, run_benchmark_detailed, BenchmarkConfig, BenchmarkModels, BenchmarkReport,
    BenchmarkRun, Metric, RowSelection,
};
use recourse_core::engines::{
    countergan_generate_batch, countergan_train, CounterganConfig, Method,
};
use recourse_core::model_io::{load_model_dir, ModelBundle};
use recourse_core::numerics::{init_params, mlp_backward, mlp_forward, Activation, Matrix, MlpParams, MlpSpec};
use recourse_core::profiles::{
    default_schema, load_csv, profile_to_map, split, Dataset, FeatureKind, RawProfile,
};
use recourse_core::Rand;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_recourse");
const DATA_SEED: u64 = 42;
const SPLIT_SEED: u64 = 42;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    let o = Outcome { id, name, pass, detail };
    println!(
        "{} criterion {:>2} {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail
    );
    o
}

fn recourse(args: &[&str]) -> (String, Duration) {
    let start = Instant::now();
    let out = Command::new(BIN).args(args).output().expect("spawn recourse");
    let elapsed = start.elapsed();
    assert!(
        out.status.success(),
        "recourse {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (String::from_utf8(out.stdout).expect("utf-8 stdout"), elapsed)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Artifacts of one full CLI run.
struct Pipeline {
    data: PathBuf,
    models: PathBuf,
    report: PathBuf,
    classifier_time: Duration,
}

impl Pipeline {
    fn run(root: &Path) -> Pipeline {
        let data = root.join("data.csv");
        let models = root.join("models");
        let report = root.join("report");
        let seed = DATA_SEED.to_string();
        recourse(&["gen-data", "--n", "3029", "--seed", &seed, "--out", s(&data)]);
        let (_, classifier_time) =
            recourse(&["train-classifier", "--data", s(&data), "--out", s(&models)]);
        recourse(&["train-autoencoder", "--data", s(&data), "--out", s(&models)]);
        let classifier = models.join("classifier.json");
        recourse(&[
            "train-countergan",
            "--classifier",
            s(&classifier),
            "--data",
            s(&data),
            "--out",
            s(&models),
        ]);
        recourse(&[
            "benchmark",
            "--models-dir",
            s(&models),
            "--data",
            s(&data),
            "--out",
            s(&report),
        ]);
        Pipeline { data, models, report, classifier_time }
    }

    fn report(&self) -> BenchmarkReport {
        let text = std::fs::read_to_string(self.report.join("report.json")).expect("report.json");
        serde_json::from_str(&text).expect("report.json parses")
    }
}

// ---------------------------------------------------------------- criterion 1

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Tanh => z.tanh(),
        Activation::Linear => z,
    }
}

/// Forward pass written out from the layer definition, independent of the
/// library. Returns every layer's pre-activations and the output.
fn manual_forward(p: &MlpParams, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut h = x.to_vec();
    let mut pre = Vec::new();
    for (layer, &a) in p.layers.iter().zip(&p.spec.activations) {
        let w = &layer.weights;
        let z: Vec<f64> = (0..w.rows())
            .map(|o| layer.bias[o] + (0..w.cols()).map(|i| w.get(o, i) * h[i]).sum::<f64>())
            .collect();
        h = z.iter().map(|&v| act(a, v)).collect();
        pre.push(z);
    }
    (pre, h)
}

/// Scalar loss `sum_k c_k * sum_n y_nk` over a batch.
fn loss(p: &MlpParams, xs: &[Vec<f64>], c: &[f64]) -> f64 {
    xs.iter()
        .map(|x| manual_forward(p, x).1.iter().zip(c).map(|(y, c)| y * c).sum::<f64>())
        .sum()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn gradient_fidelity() -> (bool, String) {
    const ARCHS: usize = 24;
    const H: f64 = 1e-6;
    let start = Instant::now();
    let mut rng = Rand::new(2024);
    let acts = [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Linear];
    let mut worst = 0.0_f64;
    let mut checked = 0usize;
    for _ in 0..ARCHS {
        let depth = 1 + rng.below(4);
        let sizes: Vec<usize> = (0..=depth).map(|_| 1 + rng.below(12)).collect();
        let activations: Vec<Activation> = (0..depth).map(|_| acts[rng.below(4)]).collect();
        let spec = MlpSpec::new(sizes.clone(), activations).expect("spec");
        let mut params = init_params(&spec, &mut rng).expect("init");
        for l in &mut params.layers {
            l.bias.iter_mut().for_each(|b| *b = rng.uniform_range(-0.5, 0.5));
        }
        let batch = 3;
        // Inputs whose ReLU pre-activations all sit clear of the kink.
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| loop {
                let x: Vec<f64> = (0..sizes[0]).map(|_| rng.uniform_range(-1.5, 1.5)).collect();
                let (pre, _) = manual_forward(&params, &x);
                let clear = pre
                    .iter()
                    .zip(&params.spec.activations)
                    .filter(|(_, &a)| a == Activation::Relu)
                    .all(|(z, _)| z.iter().all(|v| v.abs() > 1e-3));
                if clear {
                    break x;
                }
            })
            .collect();
        let out_w = *sizes.last().unwrap();
        let c: Vec<f64> = (0..out_w).map(|_| rng.uniform_range(-1.0, 1.0)).collect();

        let input = Matrix::from_rows(&xs).expect("batch");
        let (_, cache) = mlp_forward(&params, &input).expect("forward");
        let upstream = Matrix::from_vec(batch, out_w, c.repeat(batch)).expect("upstream");
        let (grads, dx) = mlp_backward(&params, &cache, &upstream).expect("backward");

        for li in 0..params.layers.len() {
            let (rows, cols) = params.layers[li].weights.shape();
            for o in 0..rows {
                for i in 0..cols {
                    let mut p = params.clone();
                    let w0 = p.layers[li].weights.get(o, i);
                    p.layers[li].weights.set(o, i, w0 + H);
                    let up = loss(&p, &xs, &c);
                    p.layers[li].weights.set(o, i, w0 - H);
                    let down = loss(&p, &xs, &c);
                    let fd = (up - down) / (2.0 * H);
                    worst = worst.max(rel_err(grads.layers[li].weights.get(o, i), fd));
                    checked += 1;
                }
                let mut p = params.clone();
                let b0 = p.layers[li].bias[o];
                p.layers[li].bias[o] = b0 + H;
                let up = loss(&p, &xs, &c);
                p.layers[li].bias[o] = b0 - H;
                let down = loss(&p, &xs, &c);
                let fd = (up - down) / (2.0 * H);
                worst = worst.max(rel_err(grads.layers[li].bias[o], fd));
                checked += 1;
            }
        }
        for n in 0..batch {
            for i in 0..sizes[0] {
                let mut x = xs.clone();
                x[n][i] += H;
                let up = loss(&params, &x, &c);
                x[n][i] -= 2.0 * H;
                let down = loss(&params, &x, &c);
                let fd = (up - down) / (2.0 * H);
                worst = worst.max(rel_err(dx.get(n, i), fd));
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < 1e-4 && secs < 30.0,
        format!("{ARCHS} architectures, {checked} partials, max rel err {worst:.2e}, {secs:.2}s"),
    )
}

// ------------------------------------------------------------ criteria 2 to 10

fn data_calibration(p: &Pipeline) -> (bool, String) {
    let d = load_csv(&p.data, &default_schema()).expect("load data");
    let rate = d.positive_rate();
    let (train, test) = split(&d, 0.8, &mut Rand::new(SPLIT_SEED)).expect("split");
    let ok = d.len() == 3029 && (0.42..=0.44).contains(&rate) && (train.len(), test.len()) == (2423, 606);
    (
        ok,
        format!("n {} positive rate {rate:.4}, split ({}, {})", d.len(), train.len(), test.len()),
    )
}

fn classifier_quality(p: &Pipeline, report: &BenchmarkReport) -> (bool, String) {
    let acc = report.classifier_accuracy;
    let secs = p.classifier_time.as_secs_f64();
    (
        (0.70..=0.90).contains(&acc) && secs < 60.0,
        format!("test accuracy {acc:.4}, train-classifier {secs:.2}s"),
    )
}

fn constraint_suite(run: &BenchmarkRun, test: &Dataset) -> (bool, String) {
    let schema = test.schema();
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for method in Method::ALL {
        for (k, r) in run.results[&method].iter().enumerate() {
            let row = run.rows[k];
            let Some(r) = r else {
                violations.push(format!("{method} row {row}: no counterfactual"));
                continue;
            };
            checked += 1;
            let x = test.raw().row(row);
            for (j, f) in schema.features().iter().enumerate() {
                let v = r.x_cf_raw.0[j];
                let bad = if !f.mutable {
                    v.to_bits() != x[j].to_bits()
                } else {
                    match f.kind {
                        FeatureKind::Continuous => !v.is_finite(),
                        FeatureKind::Integer => v.fract() != 0.0,
                        FeatureKind::MultipleOf(step) => (v / step).fract() != 0.0,
                    }
                };
                if bad {
                    violations.push(format!("{method} row {row} {}: {} -> {v}", f.name, x[j]));
                }
            }
        }
    }
    let salary_grid = schema
        .features()
        .iter()
        .any(|f| f.mutable && f.kind == FeatureKind::MultipleOf(5000.0));
    let n = run.rows.len();
    (
        violations.is_empty() && salary_grid && n == 606,
        format!(
            "{checked} counterfactuals over {n} rows, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn latency_ordering(report: &BenchmarkReport) -> (bool, String) {
    let per = |m| report.mean(m, Metric::LatencyMs);
    let gan = per(Method::Countergan);
    let (rgd, csgp) = (per(Method::Rgd), per(Method::Csgp));
    let batch = report.mean(Method::Countergan, Metric::BatchLatencyS);
    let ok = gan < 10.0 && rgd >= 100.0 * gan && csgp >= 100.0 * gan && batch < 1.0;
    (
        ok,
        format!(
            "CounteRGAN {gan:.4} ms, RGD {rgd:.3} ms ({:.0}x), CSGP {csgp:.3} ms ({:.0}x), CounteRGAN batch {batch:.4}s over {} rows",
            rgd / gan,
            csgp / gan,
            report.dataset.n
        ),
    )
}

fn efficacy_ordering(run: &BenchmarkRun) -> (bool, String) {
    let rgd = &run.results[&Method::Rgd];
    let rejected: Vec<usize> = (0..run.rows.len())
        .filter(|&k| rgd[k].as_ref().is_some_and(|r| r.score_before < 0.5))
        .collect();
    let n = rejected.len() as f64;
    let gain = |m: Method| {
        rejected
            .iter()
            .map(|&k| {
                let r = run.results[&m][k].as_ref().expect("no failures");
                r.score_after - r.score_before
            })
            .sum::<f64>()
            / n
    };
    let (g_rgd, g_csgp, g_gan) = (gain(Method::Rgd), gain(Method::Csgp), gain(Method::Countergan));
    let flipped = rejected
        .iter()
        .filter(|&&k| rgd[k].as_ref().unwrap().score_after >= 0.5)
        .count() as f64
        / n;
    let ok = !rejected.is_empty()
        && g_rgd > 0.0
        && g_csgp > 0.0
        && g_gan > 0.0
        && g_rgd > g_csgp
        && g_rgd > g_gan
        && flipped >= 0.9;
    (
        ok,
        format!(
            "{} rejected rows; gain RGD {g_rgd:.4}, CSGP {g_csgp:.4}, CounteRGAN {g_gan:.4}; RGD flips {:.1}%",
            rejected.len(),
            100.0 * flipped
        ),
    )
}

fn gan_realism(bundle: &ModelBundle, gan: &recourse_core::engines::GanModels, test: &Dataset) -> f64 {
    let inputs: Vec<RawProfile> = (0..test.len()).map(|i| test.raw_profile(i)).collect();
    let results = countergan_generate_batch(gan, &bundle.classifier, &inputs).expect("batch");
    results
        .iter()
        .map(|r| realism_metric(&bundle.ae, r).expect("realism"))
        .sum::<f64>()
        / results.len() as f64
}

fn realism_ordering(bundle: &ModelBundle, train: &Dataset, test: &Dataset, report: &BenchmarkReport) -> (bool, String) {
    let rgd = report.mean(Method::Rgd, Metric::Realism);
    let mut parts = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let gan = if seed == bundle.gan.config.seed {
            bundle.gan.clone()
        } else {
            let config = CounterganConfig {
                seed,
                ..bundle.gan.config.clone()
            };
            countergan_train(&bundle.classifier, train, &config).expect("train gan")
        };
        let realism = gan_realism(bundle, &gan, test);
        ok &= realism <= rgd;
        parts.push(format!("seed {seed} {realism:.3}"));
    }
    (ok, format!("RGD {rgd:.3} vs CounteRGAN {}", parts.join(", ")))
}

fn regularizer_behavior(bundle: &ModelBundle, train: &Dataset, test: &Dataset) -> (bool, String) {
    let mean_norm = |reg_weight: f64| {
        let config = CounterganConfig {
            reg_weight,
            seed: 0,
            ..CounterganConfig::for_width(train.schema().len())
        };
        let gan = countergan_train(&bundle.classifier, train, &config).expect("train gan");
        (0..test.len())
            .map(|i| {
                let r = gan.raw_residual(test.rows().row(i)).expect("residual");
                r.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / test.len() as f64
    };
    let (weak, strong) = (mean_norm(0.01), mean_norm(10.0));
    (
        strong < weak,
        format!("mean ||G(x)||: lambda 0.01 -> {weak:.4}, lambda 10 -> {strong:.4}"),
    )
}

fn determinism(a: &Pipeline, b: &Pipeline) -> (bool, String) {
    let mut differing = Vec::new();
    let files = [
        (a.data.clone(), b.data.clone()),
        (a.models.join("classifier.json"), b.models.join("classifier.json")),
        (a.models.join("autoencoder.json"), b.models.join("autoencoder.json")),
        (a.models.join("generator.json"), b.models.join("generator.json")),
        (a.models.join("discriminator.json"), b.models.join("discriminator.json")),
        (a.models.join("countergan_losses.csv"), b.models.join("countergan_losses.csv")),
    ];
    for (x, y) in &files {
        if std::fs::read(x).expect("artifact") != std::fs::read(y).expect("artifact") {
            differing.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let (ra, rb) = (a.report().without_timing(), b.report().without_timing());
    // Bitwise comparison of every number left after zeroing timing fields.
    let bits = |r: &BenchmarkReport| {
        let mut v = Vec::new();
        v.push(r.classifier_accuracy.to_bits());
        for m in r.methods.values() {
            for rec in &m.metrics {
                v.push(rec.mean.to_bits());
                v.push(rec.ci_half_width.to_bits());
                v.extend(rec.values.iter().map(|x| x.to_bits()));
            }
        }
        v
    };
    let same_numbers = bits(&ra) == bits(&rb) && ra == rb;
    if !same_numbers {
        differing.push("report.json".into());
    }
    let count = bits(&ra).len();
    (
        differing.is_empty(),
        if differing.is_empty() {
            format!("6 artifacts byte-identical, {count} report numbers bit-identical")
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

fn explain_smoke(p: &Pipeline, run: &BenchmarkRun, test: &Dataset, dir: &Path) -> (bool, String) {
    let gan = &run.results[&Method::Countergan];
    let k = (0..run.rows.len())
        .find(|&k| gan[k].as_ref().is_some_and(|r| r.score_before < 0.5 && r.score_after >= 0.5))
        .expect("some rejected row flipped by CounteRGAN");
    let row = run.rows[k];
    let profile = profile_to_map(&test.raw_profile(row), test.schema());
    let path = dir.join("profile.json");
    std::fs::write(&path, serde_json::to_string_pretty(&profile).unwrap()).unwrap();
    let models = s(&p.models);
    let (out, _) = recourse(&[
        "explain",
        "--models-dir",
        models,
        "--profile",
        s(&path),
        "--method",
        "countergan",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&out).expect("explain json");
    let e = &v[0];
    let before = e["score_before"].as_f64().unwrap();
    let after = e["score_after"].as_f64().unwrap();
    let entries = e["diff"].as_array().unwrap();
    let exact = entries.iter().all(|d| {
        let (o, dl, n) = (
            d["old"].as_f64().unwrap(),
            d["delta"].as_f64().unwrap(),
            d["new"].as_f64().unwrap(),
        );
        o + dl == n && e["counterfactual"][d["feature"].as_str().unwrap()].as_f64() == Some(n)
    });
    let (table, _) = recourse(&["explain", "--models-dir", models, "--profile", s(&path)]);
    let rendered = table.contains("| Feature") && table.contains("(approved)");
    let ok = before < 0.5 && after >= 0.5 && !entries.is_empty() && exact && rendered;
    (
        ok,
        format!(
            "test row {row}: score {before:.4} -> {after:.4}, {} feature edits, old + delta = new {}",
            entries.len(),
            if exact { "exactly" } else { "violated" }
        ),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut outcomes = Vec::new();
    outcomes.push(check(1, "gradient fidelity", gradient_fidelity));

    let a = Pipeline::run(&tmp.path().join("a"));
    let report = a.report();
    let full = load_csv(&a.data, &default_schema()).expect("data");
    let (train, test) = split(&full, 0.8, &mut Rand::new(SPLIT_SEED)).expect("split");
    let bundle = load_model_dir(&a.models).expect("models");
    let models = BenchmarkModels {
        classifier: &bundle.classifier,
        ae: &bundle.ae,
        prototypes: &bundle.prototypes,
        gan: &bundle.gan,
    };
    let config = BenchmarkConfig {
        selection: RowSelection::All,
        data_seed: DATA_SEED,
        split_seed: SPLIT_SEED,
        ..BenchmarkConfig::default()
    };
    let run = run_benchmark_detailed(models, &config, &test).expect("benchmark");

    outcomes.push(check(2, "data calibration", || data_calibration(&a)));
    outcomes.push(check(3, "classifier quality", || classifier_quality(&a, &report)));
    outcomes.push(check(4, "constraint suite", || constraint_suite(&run, &test)));
    outcomes.push(check(5, "latency ordering", || latency_ordering(&report)));
    outcomes.push(check(6, "efficacy ordering", || efficacy_ordering(&run)));
    outcomes.push(check(7, "realism ordering", || realism_ordering(&bundle, &train, &test, &report)));
    outcomes.push(check(8, "regularizer behavior", || regularizer_behavior(&bundle, &train, &test)));
    let b = Pipeline::run(&tmp.path().join("b"));
    outcomes.push(check(9, "determinism", || determinism(&a, &b)));
    outcomes.push(check(10, "explain smoke test", || explain_smoke(&a, &run, &test, tmp.path())));

    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
