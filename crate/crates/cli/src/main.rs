//! `recourse`: the end-to-end pipeline from synthetic data to served
//! feedback.
//!
//! ```text
//! recourse gen-data --n 3029 --seed 42 --out data.csv
//! recourse train-classifier --data data.csv --out models
//! recourse train-autoencoder --data data.csv --out models
//! recourse train-countergan --classifier models/classifier.json --data data.csv --out models
//! recourse benchmark --models-dir models --data data.csv --out report
//! recourse explain --models-dir models --profile profile.json --method countergan
//! recourse serve --models-dir models
//! ```
//!
//! Exit codes: 0 success, 1 runtime or input error, 2 usage error.

mod commands;
mod manifest;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recourse_core::engines::Method;

#[derive(Debug, Parser)]
#[command(name = "recourse", version, about = "Counterfactual feedback for tabular binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic candidate-profile dataset as CSV.
    GenData(GenDataArgs),
    /// Train the target classifier on the train split.
    TrainClassifier(TrainClassifierArgs),
    /// Train the denoising autoencoder and the class prototypes.
    TrainAutoencoder(TrainAutoencoderArgs),
    /// Train the CounteRGAN generator and discriminator against a classifier.
    TrainCountergan(TrainCounterganArgs),
    /// Run all three methods over the test split and write the metric report.
    Benchmark(BenchmarkArgs),
    /// Print one profile's suggested feature changes and scores.
    Explain(ExplainArgs),
    /// Serve the HTTP/JSON feedback API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Number of profiles.
    #[arg(long, default_value_t = 3029)]
    n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fraction of positive labels the label bias is calibrated to.
    #[arg(long, default_value_t = 0.43)]
    positive_rate: f64,
    /// Std of the label noise relative to the hidden score.
    #[arg(long, default_value_t = 0.5)]
    label_noise: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Seed of the random train/test partition.
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Fraction of rows in the train split.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

#[derive(Debug, Args)]
struct TrainClassifierArgs {
    /// Dataset CSV from gen-data.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// Initialization and shuffling seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// L2 penalty on weight matrices.
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    /// Model directory; writes classifier.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainAutoencoderArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Std of the Gaussian input corruption.
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// Nearest same-class encodings averaged into a prototype.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Model directory; writes autoencoder.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainCounterganArgs {
    /// Trained classifier.json the generator is trained against.
    #[arg(long)]
    classifier: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight of the residual-norm regularizer.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    generator_lr: f64,
    #[arg(long, default_value_t = 2e-4)]
    discriminator_lr: f64,
    /// Model directory; writes generator.json, discriminator.json and
    /// countergan_losses.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rows {
    All,
    Rejected,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Directory holding the four model files.
    #[arg(long, env = "RECOURSE_MODEL_DIR")]
    models_dir: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// Test rows to run the methods on.
    #[arg(long, value_enum, default_value_t = Rows::All)]
    rows: Rows,
    #[arg(long, default_value_t = 1000)]
    rgd_max_iters: usize,
    #[arg(long, default_value_t = 1000)]
    csgp_max_iters: usize,
    /// Discarded calls before latency timing.
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    /// Rejected profiles rendered in the feedback-examples table.
    #[arg(long, default_value_t = 2)]
    examples: usize,
    /// Output directory; writes report.md, report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long, env = "RECOURSE_MODEL_DIR")]
    models_dir: PathBuf,
    /// Flat JSON object keyed by feature name.
    #[arg(long)]
    profile: PathBuf,
    /// rgd, csgp, countergan or all.
    #[arg(long, default_value = "countergan")]
    method: String,
    /// Clamp to feature bounds (default: off for RGD, on otherwise).
    #[arg(long)]
    enforce_bounds: Option<bool>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "RECOURSE_MODEL_DIR")]
    models_dir: Option<PathBuf>,
    #[arg(long, env = "RECOURSE_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Method used when a request names none.
    #[arg(long, default_value = "countergan", value_parser = parse_method)]
    default_method: Method,
    /// Overrides every method's bounds policy.
    #[arg(long)]
    enforce_bounds: Option<bool>,
    /// JSON-lines access log.
    #[arg(long)]
    request_log: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::TrainClassifier(a) => commands::train_classifier(a),
        Command::TrainAutoencoder(a) => commands::train_autoencoder(a),
        Command::TrainCountergan(a) => commands::train_countergan(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Explain(a) => commands::explain(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
