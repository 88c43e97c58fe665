//! Reduce, train, score and time across a grid of methods and rates.
//!
//! Every `(method, rate, repeat)` cell gets a child seed
//! `seed::derive(base, [method id, rate in basis points, repeat])`, used both
//! for the reduction and for every learner trained on that cell. Rate 1.0 is
//! the unreduced baseline; it is recorded with method `original` (id 0) and
//! run once per repeat, independent of the configured methods.

mod config;
mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, LearnerSettings, DEFAULT_RATES};
pub use report::{report, runtime_table, write_report, write_runtime, ReportRow, RuntimeRow};

use crate::baselines::{fit_forest, fit_linear, predict_forest, predict_linear, ForestConfig, ForestModel, LinearModel};
use crate::dataset::{Dataset, Normalizer};
use crate::error::{Error, Result};
use crate::exprtree::ScaledModel;
use crate::gp::{run_gp, GpConfig};
use crate::metrics::pearson_r2;
use crate::reduction::{reduce, Method, ReductionSpec};
use crate::{par, seed};

/// Method label used for unreduced runs.
pub const ORIGINAL: &str = "original";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Gp,
    Rf,
    Lr,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Gp, LearnerKind::Rf, LearnerKind::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Gp => "gp",
            LearnerKind::Rf => "rf",
            LearnerKind::Lr => "lr",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gp" => Ok(LearnerKind::Gp),
            "rf" => Ok(LearnerKind::Rf),
            "lr" => Ok(LearnerKind::Lr),
            other => Err(Error::Parse(format!("unknown learner `{other}`"))),
        }
    }
}

/// A fitted model.
pub trait Predictor: Send {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>>;
}

impl Predictor for ScaledModel {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(ScaledModel::predict(self, data))
    }
}

impl Predictor for ForestModel {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        predict_forest(self, data)
    }
}

impl Predictor for LinearModel {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        predict_linear(self, data)
    }
}

/// Something that can be trained on a dataset with a seed.
pub trait Learner: Sync {
    /// Label written to the `learner` column.
    fn name(&self) -> &str;
    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>>;
}

#[derive(Debug, Clone)]
pub struct GpLearner(pub GpConfig);

impl Learner for GpLearner {
    fn name(&self) -> &str {
        "gp"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let cfg = GpConfig { seed, ..self.0.clone() };
        Ok(Box::new(run_gp(train, &cfg)?.0))
    }
}

#[derive(Debug, Clone)]
pub struct ForestLearner(pub ForestConfig);

impl Learner for ForestLearner {
    fn name(&self) -> &str {
        "rf"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let cfg = ForestConfig { seed, ..self.0.clone() };
        Ok(Box::new(fit_forest(train, &cfg)?))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearLearner;

impl Learner for LinearLearner {
    fn name(&self) -> &str {
        "lr"
    }

    fn fit(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_linear(train)))
    }
}

/// Build the learner for `kind` from shared settings.
pub fn learner(kind: LearnerKind, settings: &LearnerSettings) -> Box<dyn Learner> {
    match kind {
        LearnerKind::Gp => Box::new(GpLearner(settings.gp.clone())),
        LearnerKind::Rf => Box::new(ForestLearner(settings.forest.clone())),
        LearnerKind::Lr => Box::new(LinearLearner),
    }
}

/// One row of a results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub method: String,
    pub rate: f64,
    pub repeat: usize,
    pub learner: String,
    pub seed: u64,
    pub train_r2: Option<f64>,
    pub test_r2: Option<f64>,
    pub reduce_seconds: f64,
    pub train_seconds: f64,
    pub reduced_rows: usize,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// The row with its timing columns zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> RunResult {
        RunResult {
            reduce_seconds: 0.0,
            train_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Child seed for one sweep cell. Method id 0 is the unreduced baseline.
pub fn cell_seed(base: u64, method_id: u64, rate: f64, repeat: usize) -> u64 {
    seed::derive(base, &[method_id, rate_basis_points(rate), repeat as u64])
}

fn rate_basis_points(rate: f64) -> u64 {
    (rate * 10_000.0).round() as u64
}

/// `⌈rate · n⌉`, at least 1.
pub fn reduced_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Normalize `train` and `test` with statistics fitted on `train` alone.
pub fn normalize_split(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Normalizer)> {
    let norm = Normalizer::fit(train);
    Ok((norm.apply(train)?, norm.apply(test)?, norm))
}

/// Load, split and normalize the configured dataset, then run the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    config.validate()?;
    let data = match &config.target {
        Some(t) => Dataset::load_csv(&config.dataset, t)?,
        None => {
            let t = last_header(&config.dataset)?;
            Dataset::load_csv(&config.dataset, &t)?
        }
    };
    let (train, test) = data.split(config.train_rows)?;
    let learners: Vec<Box<dyn Learner>> = config
        .learners
        .iter()
        .map(|&k| learner(k, &config.settings))
        .collect();
    let refs: Vec<&dyn Learner> = learners.iter().map(AsRef::as_ref).collect();
    run_experiment_with(config, &train, &test, &refs)
}

/// Name of the last column of a CSV file.
pub fn last_header(path: &Path) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::Parse(format!("{other:?}")),
        })?;
    rdr.headers()?
        .iter()
        .last()
        .map(str::to_owned)
        .ok_or(Error::EmptyData)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Option<Method>,
    rate: f64,
    repeat: usize,
}

impl Cell {
    fn method_id(&self) -> u64 {
        self.method.map_or(0, Method::id)
    }

    fn method_name(&self) -> &'static str {
        self.method.map_or(ORIGINAL, Method::as_str)
    }
}

/// Run the sweep on raw (unnormalized) `train`/`test` with the given learners.
///
/// The configured `learners` list is ignored in favour of `learners`; the
/// dataset path and target are not used. Results come back sorted by
/// method, rate, repeat and learner order.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    learners: &[&dyn Learner],
) -> Result<Vec<RunResult>> {
    config.validate()?;
    let (train, test, _) = normalize_split(train, test)?;
    let mut rates = config.rates.clone();
    rates.sort_by(f64::total_cmp);
    rates.dedup();

    let mut cells = Vec::new();
    for &rate in &rates {
        let methods: Vec<Option<Method>> = if rate >= 1.0 {
            vec![None]
        } else {
            config.methods.iter().copied().map(Some).collect()
        };
        for method in methods {
            for repeat in 0..config.repeats {
                cells.push(Cell { method, rate, repeat });
            }
        }
    }

    let per_cell = par::with_jobs(config.jobs, || {
        par::map_slice(&cells, |cell| run_cell(config, cell, &train, &test, learners))
    });
    let mut results: Vec<RunResult> = per_cell.into_iter().flatten().collect();
    let method_rank = |m: &str| {
        Method::ALL
            .iter()
            .position(|x| x.as_str() == m)
            .map_or(0, |p| p + 1)
    };
    let learner_rank = |l: &str| learners.iter().position(|x| x.name() == l).unwrap_or(usize::MAX);
    results.sort_by(|a, b| {
        method_rank(&a.method)
            .cmp(&method_rank(&b.method))
            .then(a.rate.total_cmp(&b.rate))
            .then(a.repeat.cmp(&b.repeat))
            .then(learner_rank(&a.learner).cmp(&learner_rank(&b.learner)))
    });
    Ok(results)
}

fn run_cell(
    config: &ExperimentConfig,
    cell: &Cell,
    train: &Dataset,
    test: &Dataset,
    learners: &[&dyn Learner],
) -> Vec<RunResult> {
    let child = cell_seed(config.seed, cell.method_id(), cell.rate, cell.repeat);
    let base = RunResult {
        dataset: config.name.clone(),
        method: cell.method_name().to_owned(),
        rate: cell.rate,
        repeat: cell.repeat,
        learner: String::new(),
        seed: child,
        train_r2: None,
        test_r2: None,
        reduce_seconds: 0.0,
        train_seconds: 0.0,
        reduced_rows: 0,
        status: "ok".to_owned(),
    };

    let started = Instant::now();
    let reduced = match cell.method {
        None => Ok(train.clone()),
        Some(method) => {
            let spec = ReductionSpec {
                kmeans_batch_size: config.batch_size(),
                kmeans_iterations: config.settings.kmeans_iterations,
                ..ReductionSpec::new(method, reduced_count(cell.rate, train.n_rows()), child)
            };
            reduce(train, &spec)
        }
    };
    let reduce_seconds = started.elapsed().as_secs_f64();

    learners
        .iter()
        .map(|l| {
            let mut row = RunResult {
                learner: l.name().to_owned(),
                reduce_seconds,
                ..base.clone()
            };
            match &reduced {
                Err(e) => row.status = format!("failed: {e}"),
                Ok(data) => {
                    row.reduced_rows = data.n_rows();
                    let started = Instant::now();
                    let fitted = l.fit(data, child);
                    row.train_seconds = started.elapsed().as_secs_f64();
                    let scored = fitted.and_then(|model| {
                        let tr = pearson_r2(&model.predict(data)?, data.targets())?;
                        let te = pearson_r2(&model.predict(test)?, test.targets())?;
                        Ok((tr, te))
                    });
                    match scored {
                        Ok((tr, te)) => {
                            row.train_r2 = Some(tr);
                            row.test_r2 = Some(te);
                        }
                        Err(e) => row.status = format!("failed: {e}"),
                    }
                }
            }
            row
        })
        .collect()
}

/// Write results with a header row.
pub fn write_results<W: std::io::Write>(writer: W, results: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<results writer>".into(),
        source,
    })
}

/// Append results to `path`, writing the header only if the file is new or empty.
pub fn append_results(path: &Path, results: &[RunResult]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_results<R: std::io::Read>(reader: R) -> Result<Vec<RunResult>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn load_results(path: &Path) -> Result<Vec<RunResult>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_results(file)
}
