use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use recourse_core::benchmark::{
    export_csv, render_diff, render_examples, render_table, run_benchmark_detailed,
    BenchmarkConfig, BenchmarkModels, Example, RowSelection,
};
use recourse_core::engines::{
    countergan_generate_with, countergan_train, csgp_generate, make_diff, rgd_generate, CfResult,
    CounterganConfig, CsgpConfig, Method, RgdConfig,
};
use recourse_core::model_io::{
    load_classifier, load_model_dir, save_autoencoder, save_classifier, save_gan, ModelBundle,
    AUTOENCODER_FILE, CLASSIFIER_FILE, DISCRIMINATOR_FILE, GENERATOR_FILE,
};
use recourse_core::predictors::{
    compute_prototypes, train_autoencoder as fit_autoencoder, train_classifier as fit_classifier,
    TrainConfig,
};
use recourse_core::profiles::{
    default_schema, generate_dataset, load_csv, parse_profile_json, profile_to_map, save_csv,
    split, Dataset, GeneratorConfig, RawProfile,
};
use recourse_core::{write_atomic, Rand};
use recourse_service::ServiceConfig;
use serde_json::{json, Value};

use crate::manifest::Manifest;
use crate::{
    BenchmarkArgs, ExplainArgs, GenDataArgs, Rows, ServeArgs, SplitArgs, TrainAutoencoderArgs,
    TrainClassifierArgs, TrainCounterganArgs,
};

pub const LOSSES_FILE: &str = "countergan_losses.csv";

fn load_split(data: &Path, s: &SplitArgs) -> Result<(Dataset, Dataset)> {
    let d = load_csv(data, &default_schema())
        .with_context(|| format!("--data {}", data.display()))?;
    Ok(split(&d, s.train_fraction, &mut Rand::new(s.split_seed))?)
}

fn split_json(s: &SplitArgs) -> Value {
    json!({ "split_seed": s.split_seed, "train_fraction": s.train_fraction })
}

/// The generator seed recorded by gen-data, when its manifest is present.
fn data_seed(data: &Path) -> Option<u64> {
    let mut name = data.file_name()?.to_os_string();
    name.push(".manifest.json");
    let text = std::fs::read_to_string(data.with_file_name(name)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v["seeds"]["data"].as_u64()
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let config = GeneratorConfig {
        n_samples: a.n,
        target_positive_rate: a.positive_rate,
        seed: a.seed,
        label_noise_std: a.label_noise,
    };
    let d = generate_dataset(&config)?;
    save_csv(&d, &a.out)?;
    Manifest::new("gen-data", json!(config))
        .seed("data", a.seed)
        .metric("rows", d.len() as f64)
        .metric("positive_rate", d.positive_rate())
        .output(&a.out)?
        .write_beside(&a.out)?;
    println!(
        "wrote {} rows (positive rate {:.4}) to {}",
        d.len(),
        d.positive_rate(),
        a.out.display()
    );
    Ok(())
}

pub fn train_classifier(a: TrainClassifierArgs) -> Result<()> {
    let (train, test) = load_split(&a.data, &a.split)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
        weight_decay: a.weight_decay,
    };
    let (model, report) = fit_classifier(&train, &test, &config)?;
    let path = a.out.join(CLASSIFIER_FILE);
    save_classifier(&model, &path)?;
    Manifest::new(
        "train-classifier",
        json!({ "train": config, "split": split_json(&a.split) }),
    )
    .seed("init", a.seed)
    .seed("split", a.split.split_seed)
    .metric("train_accuracy", report.train_accuracy)
    .metric("test_accuracy", report.test_accuracy)
    .metric("final_loss", report.final_loss)
    .input(&a.data)?
    .output(&path)?
    .write_beside(&path)?;
    println!(
        "classifier: train accuracy {:.4}, test accuracy {:.4} -> {}",
        report.train_accuracy,
        report.test_accuracy,
        path.display()
    );
    Ok(())
}

pub fn train_autoencoder(a: TrainAutoencoderArgs) -> Result<()> {
    let (train, test) = load_split(&a.data, &a.split)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
        weight_decay: 0.0,
    };
    let ae = fit_autoencoder(&train, Some(&test), a.noise_std, &config)?;
    let prototypes = compute_prototypes(&ae, &train, a.k)?;
    let path = a.out.join(AUTOENCODER_FILE);
    save_autoencoder(&ae, Some(&prototypes), &path)?;
    Manifest::new(
        "train-autoencoder",
        json!({
            "train": config,
            "noise_std": a.noise_std,
            "k": a.k,
            "split": split_json(&a.split),
        }),
    )
    .seed("init", a.seed)
    .seed("split", a.split.split_seed)
    .metric("final_loss", ae.meta.final_loss)
    .metric("test_reconstruction_error", ae.meta.test_reconstruction_error)
    .input(&a.data)?
    .output(&path)?
    .write_beside(&path)?;
    println!(
        "autoencoder: test reconstruction error {:.4} -> {}",
        ae.meta.test_reconstruction_error,
        path.display()
    );
    Ok(())
}

pub fn train_countergan(a: TrainCounterganArgs) -> Result<()> {
    let classifier = load_classifier(&a.classifier)
        .with_context(|| format!("--classifier {}", a.classifier.display()))?;
    let (train, _) = load_split(&a.data, &a.split)?;
    if classifier.schema.hash() != train.schema().hash() {
        bail!(
            "--classifier was trained on a different split than --data with --split-seed {} \
             (schema {} vs {})",
            a.split.split_seed,
            classifier.schema.hash(),
            train.schema().hash()
        );
    }
    let config = CounterganConfig {
        reg_weight: a.lambda,
        batch_size: a.batch_size,
        steps: a.steps,
        generator_lr: a.generator_lr,
        discriminator_lr: a.discriminator_lr,
        seed: a.seed,
        ..CounterganConfig::for_width(train.schema().len())
    };
    let gan = countergan_train(&classifier, &train, &config)?;
    let (g, d, l) = (
        a.out.join(GENERATOR_FILE),
        a.out.join(DISCRIMINATOR_FILE),
        a.out.join(LOSSES_FILE),
    );
    save_gan(&gan, &g, &d)?;
    gan.write_loss_csv(&l)?;
    let mut m = Manifest::new(
        "train-countergan",
        json!({ "countergan": config, "split": split_json(&a.split) }),
    )
    .seed("init", a.seed)
    .seed("split", a.split.split_seed)
    .input(&a.classifier)?
    .input(&a.data)?
    .output(&g)?
    .output(&d)?
    .output(&l)?;
    if let (Some(dl), Some(gl)) = (gan.d_losses.last(), gan.g_losses.last()) {
        m = m.metric("final_d_loss", *dl).metric("final_g_loss", *gl);
    }
    m.write_beside(&g)?;
    println!(
        "countergan: {} steps, lambda {} -> {}, {}",
        a.steps,
        a.lambda,
        g.display(),
        d.display()
    );
    Ok(())
}

fn load_models(dir: &Path) -> Result<ModelBundle> {
    load_model_dir(dir).with_context(|| format!("--models-dir {}", dir.display()))
}

/// Feedback examples: rejected rows where every method succeeded, preferring
/// those CounteRGAN flips past the threshold.
fn pick_examples(
    run: &recourse_core::benchmark::BenchmarkRun,
    test: &Dataset,
    count: usize,
) -> Result<Vec<Example>> {
    let complete: Vec<(usize, Vec<&CfResult>)> = (0..run.rows.len())
        .filter_map(|k| {
            let rs: Option<Vec<&CfResult>> =
                Method::ALL.iter().map(|m| run.results[m][k].as_ref()).collect();
            rs.filter(|rs| rs[0].score_before < 0.5).map(|rs| (k, rs))
        })
        .collect();
    let flipped = complete.iter().filter(|(_, rs)| rs[2].score_after >= 0.5);
    let others = complete.iter().filter(|(_, rs)| rs[2].score_after < 0.5);
    let schema = test.schema();
    flipped
        .chain(others)
        .take(count)
        .map(|(k, rs)| {
            let input = test.raw_profile(run.rows[*k]);
            let diffs = Method::ALL
                .iter()
                .zip(rs)
                .map(|(m, r)| Ok((*m, make_diff(&input, r, schema)?)))
                .collect::<recourse_core::Result<Vec<_>>>()?;
            Ok(Example { input, diffs })
        })
        .collect()
}

pub fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let bundle = load_models(&a.models_dir)?;
    let (_, test) = load_split(&a.data, &a.split)?;
    let config = BenchmarkConfig {
        rgd: RgdConfig {
            max_iters: a.rgd_max_iters,
            ..RgdConfig::default()
        },
        csgp: CsgpConfig {
            max_iters: a.csgp_max_iters,
            ..CsgpConfig::default()
        },
        warmup: a.warmup,
        selection: match a.rows {
            Rows::All => RowSelection::All,
            Rows::Rejected => RowSelection::Rejected,
        },
        data_seed: data_seed(&a.data).unwrap_or(0),
        split_seed: a.split.split_seed,
    };
    let models = BenchmarkModels {
        classifier: &bundle.classifier,
        ae: &bundle.ae,
        prototypes: &bundle.prototypes,
        gan: &bundle.gan,
    };
    let run = run_benchmark_detailed(models, &config, &test)
        .context("benchmark failed; check that --split-seed matches training")?;
    let table = render_table(&run.report);
    let examples = pick_examples(&run, &test, a.examples)?;
    let mut md = format!("# Counterfactual benchmark\n\n{table}");
    if !examples.is_empty() {
        md.push_str("\n## Feedback examples\n\n");
        md.push_str(&render_examples(test.schema(), &examples)?);
    }
    let (md_path, csv_path, json_path) = (
        a.out.join("report.md"),
        a.out.join("report.csv"),
        a.out.join("report.json"),
    );
    write_atomic(&md_path, md.as_bytes())?;
    export_csv(&run.report, &csv_path)?;
    write_atomic(&json_path, run.report.to_json().as_bytes())?;
    let mut m = Manifest::new(
        "benchmark",
        json!({ "benchmark": config, "split": split_json(&a.split) }),
    )
    .seed("data", config.data_seed)
    .seed("split", a.split.split_seed)
    .metric("classifier_accuracy", run.report.classifier_accuracy)
    .input(&a.data)?;
    for name in [CLASSIFIER_FILE, AUTOENCODER_FILE, GENERATOR_FILE, DISCRIMINATOR_FILE] {
        m = m.input(&a.models_dir.join(name))?;
    }
    m.output(&md_path)?
        .output(&csv_path)?
        .output(&json_path)?
        .write_beside(&a.out.join("benchmark"))?;
    print!("{md}");
    Ok(())
}

fn explain_one(
    bundle: &ModelBundle,
    method: Method,
    raw: &RawProfile,
    enforce: Option<bool>,
) -> Result<CfResult> {
    let r = match method {
        Method::Rgd => rgd_generate(
            &bundle.classifier,
            raw,
            &RgdConfig {
                enforce_bounds: enforce.unwrap_or(false),
                ..RgdConfig::default()
            },
        ),
        Method::Csgp => csgp_generate(
            &bundle.classifier,
            &bundle.ae,
            &bundle.prototypes,
            raw,
            &CsgpConfig {
                enforce_bounds: enforce.unwrap_or(true),
                ..CsgpConfig::default()
            },
        ),
        Method::Countergan => countergan_generate_with(
            &bundle.gan,
            &bundle.classifier,
            raw,
            enforce.unwrap_or(true),
        ),
    };
    Ok(r?)
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    let methods: Vec<Method> = if a.method.eq_ignore_ascii_case("all") {
        Method::ALL.to_vec()
    } else {
        vec![a.method.parse::<Method>().context("--method")?]
    };
    let bundle = load_models(&a.models_dir)?;
    let schema = &bundle.classifier.schema;
    let text = std::fs::read_to_string(&a.profile)
        .with_context(|| format!("--profile {}", a.profile.display()))?;
    let (raw, _) = parse_profile_json(&text, schema)
        .with_context(|| format!("--profile {}", a.profile.display()))?;
    let violations = schema.violations(&raw)?;
    if !violations.is_empty() {
        bail!("--profile {}: {}", a.profile.display(), violations.join("; "));
    }

    let mut diffs = Vec::new();
    for &m in &methods {
        let r = explain_one(&bundle, m, &raw, a.enforce_bounds)?;
        diffs.push((m, make_diff(&raw, &r, schema)?, r));
    }
    if a.json {
        let out: Vec<Value> = diffs
            .iter()
            .map(|(m, d, r)| {
                json!({
                    "method": m,
                    "diff": d.entries,
                    "score_before": d.score_before,
                    "score_after": d.score_after,
                    "approved_before": d.score_before >= 0.5,
                    "approved_after": d.score_after >= 0.5,
                    "counterfactual": profile_to_map(&r.x_cf_raw, schema),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    for (k, (m, d, _)) in diffs.iter().enumerate() {
        if k > 0 {
            println!();
        }
        print!("{}", render_diff(*m, d));
    }
    if methods.len() > 1 {
        let example = Example {
            input: raw.clone(),
            diffs: diffs.iter().map(|(m, d, _)| (*m, d.clone())).collect(),
        };
        println!();
        print!("{}", render_examples(schema, &[example])?);
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        bind: a.bind,
        model_dir: a.models_dir.map(PathBuf::from),
        default_method: a.default_method,
        enforce_bounds: a.enforce_bounds,
        request_log: a.request_log,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    rt.block_on(recourse_service::serve(config))
        .context("serving")?;
    Ok(())
}
