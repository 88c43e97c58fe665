//! Flat `key = value` configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key '=' value      (whitespace around key and value is trimmed)
//! list    := item (',' item)*   (for list-valued keys)
//! ```
//!
//! Keys may appear at most once. Recognized keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `dataset` | CSV path, relative to the config file | required |
//! | `name` | dataset label in results | file stem |
//! | `target` | target column | last column |
//! | `train_rows` | leading rows used for training | required |
//! | `rates` | reduction rates in (0, 1] | `0.01,0.05,0.1,0.2,0.3,0.4,0.5,1.0` |
//! | `repeats` | runs per (method, rate) | `10` |
//! | `methods` | subset of `sampling,binning,kmeans` | all |
//! | `learners` | subset of `gp,rf,lr` | all |
//! | `seed` | base seed | `0` |
//! | `jobs` | worker threads, `0` = all cores | `0` |
//! | `kmeans.batch_size`, `kmeans.iterations` | mini-batch k-means | `100`, automatic |
//! | `gp.*` | any [`GpConfig`] field except `seed` | see [`GpConfig`] |
//! | `rf.*` | any [`ForestConfig`] field except `seed` | see [`ForestConfig`] |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::LearnerKind;
use crate::baselines::ForestConfig;
use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::reduction::{Method, DEFAULT_BATCH_SIZE};

pub const DEFAULT_RATES: [f64; 8] = [0.01, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 1.0];

/// Parsed `key = value` pairs, with the line each came from.
#[derive(Debug, Default)]
struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_owned();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if map.insert(key.clone(), (i + 1, v.trim().to_owned())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Entries { map })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: bad value `{v}` for `{key}`"))),
        }
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("line {line}: bad item `{s}` in `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn reject_leftovers(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key `{k}`"))),
        }
    }
}

/// Hyperparameters shared by the sweep and the single-run commands.
#[derive(Debug, Clone, Default)]
pub struct LearnerSettings {
    pub gp: GpConfig,
    pub forest: ForestConfig,
    pub kmeans_batch_size: Option<usize>,
    pub kmeans_iterations: Option<usize>,
}

impl LearnerSettings {
    /// Parse only the `gp.*`, `rf.*` and `kmeans.*` keys, ignoring the rest.
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let s = Self::take_from(&mut e)?;
        if let Some((k, (line, _))) = e
            .map
            .iter()
            .find(|(k, _)| k.starts_with("gp.") || k.starts_with("rf.") || k.starts_with("kmeans."))
        {
            return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read(path.as_ref())?)
    }

    fn take_from(e: &mut Entries) -> Result<Self> {
        let mut gp = GpConfig::default();
        e.set("gp.population_size", &mut gp.population_size)?;
        e.set("gp.mutation_rate", &mut gp.mutation_rate)?;
        e.set("gp.max_selection_pressure", &mut gp.max_selection_pressure)?;
        e.set("gp.max_tree_size", &mut gp.max_tree_size)?;
        e.set("gp.max_tree_depth", &mut gp.max_tree_depth)?;
        e.set("gp.elites", &mut gp.elites)?;
        e.set("gp.comparison_factor", &mut gp.comparison_factor)?;
        e.set("gp.constant_opt_iterations", &mut gp.constant_opt_iterations)?;
        e.set("gp.max_generations", &mut gp.max_generations)?;
        gp.max_seconds = e.take("gp.max_seconds")?;
        gp.validate()?;

        let mut forest = ForestConfig::default();
        e.set("rf.n_trees", &mut forest.n_trees)?;
        e.set("rf.instance_fraction", &mut forest.instance_fraction)?;
        e.set("rf.feature_fraction", &mut forest.feature_fraction)?;
        e.set("rf.min_leaf_size", &mut forest.min_leaf_size)?;
        forest.validate()?;

        Ok(LearnerSettings {
            gp,
            forest,
            kmeans_batch_size: e.take("kmeans.batch_size")?,
            kmeans_iterations: e.take("kmeans.iterations")?,
        })
    }
}

/// A full reduction/training sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub name: String,
    pub target: Option<String>,
    pub train_rows: usize,
    pub rates: Vec<f64>,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub learners: Vec<LearnerKind>,
    pub seed: u64,
    /// Worker threads; `0` uses every core, `1` is the timing mode.
    pub jobs: usize,
    pub settings: LearnerSettings,
}

impl ExperimentConfig {
    /// Defaults for an in-memory dataset called `name`.
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            name: name.into(),
            target: None,
            train_rows: 0,
            rates: DEFAULT_RATES.to_vec(),
            repeats: 10,
            methods: Method::ALL.to_vec(),
            learners: LearnerKind::ALL.to_vec(),
            seed: 0,
            jobs: 0,
            settings: LearnerSettings::default(),
        }
    }

    /// Parse a config; a relative `dataset` path is resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let dataset: PathBuf = e
            .take::<String>("dataset")?
            .ok_or_else(|| Error::Config("missing key `dataset`".into()))?
            .into();
        let dataset = if dataset.is_relative() { base_dir.join(dataset) } else { dataset };
        let name = e.take("name")?.unwrap_or_else(|| {
            dataset
                .file_stem()
                .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned())
        });
        let mut cfg = ExperimentConfig::new(name);
        cfg.dataset = dataset;
        cfg.target = e.take("target")?;
        cfg.train_rows = e
            .take("train_rows")?
            .ok_or_else(|| Error::Config("missing key `train_rows`".into()))?;
        if let Some(r) = e.take_list("rates")? {
            cfg.rates = r;
        }
        e.set("repeats", &mut cfg.repeats)?;
        if let Some(m) = e.take_list("methods")? {
            cfg.methods = m;
        }
        if let Some(l) = e.take_list("learners")? {
            cfg.learners = l;
        }
        e.set("seed", &mut cfg.seed)?;
        e.set("jobs", &mut cfg.jobs)?;
        cfg.settings = LearnerSettings::take_from(&mut e)?;
        e.reject_leftovers()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&read(path)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::Config("`rates` is empty".into()));
        }
        if let Some(&r) = self.rates.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::Config(format!("rate {r} is outside (0, 1]")));
        }
        if self.repeats == 0 {
            return Err(Error::out_of_range("repeats", 0, ">= 1"));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("`learners` is empty".into()));
        }
        if self.methods.is_empty() && self.rates.iter().any(|&r| r < 1.0) {
            return Err(Error::Config("`methods` is empty but reduced rates are requested".into()));
        }
        self.settings.gp.validate()?;
        self.settings.forest.validate()
    }

    pub(crate) fn batch_size(&self) -> usize {
        self.settings.kmeans_batch_size.unwrap_or(DEFAULT_BATCH_SIZE)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
