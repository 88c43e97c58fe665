use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use symreduce::baselines::{fit_forest, fit_linear, predict_forest, predict_linear};
use symreduce::gp::{run_gp, GpConfig};
use symreduce::harness::{self, ExperimentConfig, LearnerSettings, RunResult, ORIGINAL};
use symreduce::metrics::pearson_r2;
use symreduce::reduction::{reduce, Method, ReductionSpec, DEFAULT_BATCH_SIZE};
use symreduce::{par, Dataset, Normalizer};

#[derive(Parser)]
#[command(name = "symreduce", version, about = "Reduce regression training data and train symbolic regression models on it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a CSV to a target number of rows.
    Reduce(ReduceArgs),
    /// Train offspring-selection GP and score it on a test file.
    TrainGp(TrainArgs),
    /// Train a random forest and score it on a test file.
    TrainRf(TrainArgs),
    /// Fit ordinary least squares and score it on a test file.
    TrainLr(TrainArgs),
    /// Run a full reduction/training sweep from a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's worker count (1 = timing mode).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a results CSV into median/IQR tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Runtime/speedup table; defaults to `<out>` with a `_runtime` suffix.
        #[arg(long)]
        runtime: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target column; defaults to the last column.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` file; only `gp.*` / `rf.*` keys are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target column; defaults to the last column of the training file.
    #[arg(long)]
    target: Option<String>,
    /// Append a result row to this CSV.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Dataset label for the result row; defaults to the training file stem.
    #[arg(long)]
    name: Option<String>,
    /// Write the fitted z-score statistics (column,mean,std) here.
    #[arg(long)]
    normalizer: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::TrainGp(a) => cmd_train(a, "gp"),
        Command::TrainRf(a) => cmd_train(a, "rf"),
        Command::TrainLr(a) => cmd_train(a, "lr"),
        Command::Experiment { config, out, jobs } => cmd_experiment(&config, &out, jobs),
        Command::Report { input, out, runtime } => cmd_report(&input, &out, runtime),
    }
}

fn target_of(path: &Path, target: Option<String>) -> Result<String> {
    match target {
        Some(t) => Ok(t),
        None => Ok(harness::last_header(path)?),
    }
}

fn cmd_reduce(a: ReduceArgs) -> Result<()> {
    let target = target_of(&a.input, a.target)?;
    let data = Dataset::load_csv(&a.input, &target)?;
    let spec = ReductionSpec {
        kmeans_batch_size: a.batch_size,
        kmeans_iterations: a.iterations,
        ..ReductionSpec::new(a.method, a.count, a.seed)
    };
    let reduced = if a.method == Method::KMeans {
        // Distances are only meaningful on comparable scales.
        let norm = Normalizer::fit(&data);
        norm.invert(&reduce(&norm.apply(&data)?, &spec)?)?
    } else {
        reduce(&data, &spec)?
    };
    write_in_header_order(&reduced, &a.input, &a.out)?;
    eprintln!("{} -> {} rows", data.n_rows(), reduced.n_rows());
    Ok(())
}

/// Write `data` using the column order of the CSV at `like`.
fn write_in_header_order(data: &Dataset, like: &Path, out: &Path) -> Result<()> {
    let header: Vec<String> = csv::Reader::from_path(like)?
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let index: Vec<Option<usize>> = header
        .iter()
        .map(|h| data.feature_names().iter().position(|f| f == h))
        .collect();
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(&header)?;
    for (row, t) in data.rows().zip(data.targets()) {
        w.write_record(index.iter().map(|i| i.map_or(*t, |j| row[j]).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_train(a: TrainArgs, learner: &str) -> Result<()> {
    let settings = match &a.config {
        Some(p) => LearnerSettings::load(p)?,
        None => LearnerSettings::default(),
    };
    let target = target_of(&a.train, a.target.clone())?;
    let train_raw = Dataset::load_csv(&a.train, &target)?;
    let test_raw = Dataset::load_csv(&a.test, &target)?;
    if train_raw.feature_names() != test_raw.feature_names() {
        bail!("train and test files have different feature columns");
    }
    let (train, test, norm) = harness::normalize_split(&train_raw, &test_raw)?;
    if let Some(p) = &a.normalizer {
        norm.write_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }

    let started = Instant::now();
    let (train_pred, test_pred) = par::with_jobs(a.jobs, || -> Result<_> {
        Ok(match learner {
            "gp" => {
                let cfg = GpConfig { seed: a.seed, ..settings.gp.clone() };
                let (model, stats) = run_gp(&train, &cfg)?;
                println!("{model}");
                println!("generations = {}", stats.generations);
                println!("evaluations = {}", stats.evaluations);
                println!("seconds = {:.3}", stats.wall_clock_secs);
                (model.predict(&train), model.predict(&test))
            }
            "rf" => {
                let cfg = symreduce::baselines::ForestConfig { seed: a.seed, ..settings.forest.clone() };
                let model = fit_forest(&train, &cfg)?;
                println!("trees = {}", model.trees.len());
                (predict_forest(&model, &train)?, predict_forest(&model, &test)?)
            }
            _ => {
                let model = fit_linear(&train);
                println!("intercept = {}", model.intercept);
                println!("weights = {:?}", model.weights);
                (predict_linear(&model, &train)?, predict_linear(&model, &test)?)
            }
        })
    })?;
    let train_seconds = started.elapsed().as_secs_f64();
    let train_r2 = pearson_r2(&train_pred, train.targets())?;
    let test_r2 = pearson_r2(&test_pred, test.targets())?;
    println!("train_r2 = {train_r2:.6}");
    println!("test_r2 = {test_r2:.6}");

    if let Some(path) = &a.results {
        let name = a.name.clone().unwrap_or_else(|| {
            a.train
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        });
        let row = RunResult {
            dataset: name,
            method: ORIGINAL.into(),
            rate: 1.0,
            repeat: 0,
            learner: learner.into(),
            seed: a.seed,
            train_r2: Some(train_r2),
            test_r2: Some(test_r2),
            reduce_seconds: 0.0,
            train_seconds,
            reduced_rows: train.n_rows(),
            status: "ok".into(),
        };
        harness::append_results(path, &[row])?;
    }
    Ok(())
}

fn cmd_experiment(config: &Path, out: &Path, jobs: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    let results = harness::run_experiment(&cfg)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    harness::write_results(BufWriter::new(file), &results)?;
    let failed = results.iter().filter(|r| !r.is_ok()).count();
    eprintln!("{} runs written to {} ({failed} failed)", results.len(), out.display());
    Ok(())
}

fn cmd_report(input: &Path, out: &Path, runtime: Option<PathBuf>) -> Result<()> {
    let results = harness::load_results(input)?;
    if results.is_empty() {
        bail!("{} has no result rows", input.display());
    }
    let rows = harness::report(&results);
    harness::write_report(File::create(out).with_context(|| format!("creating {}", out.display()))?, &rows)?;
    let runtime = runtime.unwrap_or_else(|| {
        let stem = out.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
        out.with_file_name(format!("{stem}_runtime.csv"))
    });
    harness::write_runtime(
        File::create(&runtime).with_context(|| format!("creating {}", runtime.display()))?,
        &harness::runtime_table(&rows),
    )?;
    Ok(())
}
