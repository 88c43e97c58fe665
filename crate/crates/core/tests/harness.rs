use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use symreduce::harness::{
    run_experiment_with, ExperimentConfig, Learner, LinearLearner, Predictor, ORIGINAL,
};
use symreduce::metrics::pearson_r2;
use symreduce::{Dataset, Error, Normalizer, Result};

fn data(n: usize, offset: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (offset..offset + n)
        .map(|i| vec![10.0 + (i as f64 * 0.7).sin() * 4.0 + i as f64 * 0.01, 3.0 * (i as f64 * 0.3).cos()])
        .collect();
    let y = rows.iter().map(|r| r[0] * r[1] + 100.0).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

fn fingerprint(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

/// Records every row it is trained on and every dataset it predicts.
struct Auditor {
    forbidden: HashSet<Vec<u64>>,
    fits: AtomicUsize,
    fit_rows_seen: AtomicUsize,
    predicted: Mutex<Vec<(usize, f64)>>,
}

struct MeanModel(f64);

impl Predictor for MeanModel {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(data.rows().map(|r| r[0] + self.0).collect())
    }
}

struct Recorder<'a>(&'a Auditor, f64);

impl Predictor for Recorder<'_> {
    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mean0 = data.column(0).iter().sum::<f64>() / data.n_rows() as f64;
        self.0.predicted.lock().unwrap().push((data.n_rows(), mean0));
        MeanModel(self.1).predict(data)
    }
}

impl Learner for &'static Auditor {
    fn name(&self) -> &str {
        "audit"
    }

    fn fit(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Predictor>> {
        self.fits.fetch_add(1, Ordering::SeqCst);
        for row in train.rows() {
            assert!(!self.forbidden.contains(&fingerprint(row)), "test row reached fit");
        }
        self.fit_rows_seen.fetch_add(train.n_rows(), Ordering::SeqCst);
        Ok(Box::new(Recorder(self, 0.0)))
    }
}

#[test]
fn learners_never_train_on_test_rows() {
    let (train, test) = (data(200, 0), data(100, 1000));
    let norm = Normalizer::fit(&train);
    let test_norm = norm.apply(&test).unwrap();
    let auditor: &'static Auditor = Box::leak(Box::new(Auditor {
        forbidden: test_norm.rows().chain(test.rows()).map(fingerprint).collect(),
        fits: AtomicUsize::new(0),
        fit_rows_seen: AtomicUsize::new(0),
        predicted: Mutex::new(Vec::new()),
    }));

    let mut cfg = ExperimentConfig::new("audit");
    cfg.rates = vec![0.1, 0.5, 1.0];
    cfg.repeats = 3;
    let res = run_experiment_with(&cfg, &train, &test, &[&auditor]).unwrap();
    let expected = 3 * 2 * 3 + 3;
    assert_eq!(res.len(), expected);
    assert_eq!(auditor.fits.load(Ordering::SeqCst), expected);

    // The test split is predicted exactly once per run, always in full and
    // always normalized with training statistics.
    let test_mean0 = test_norm.column(0).iter().sum::<f64>() / 100.0;
    let predicted = auditor.predicted.lock().unwrap();
    let test_calls: Vec<_> = predicted.iter().filter(|(n, m)| *n == 100 && (m - test_mean0).abs() < 1e-12).collect();
    assert_eq!(test_calls.len(), expected);
    assert!(test_mean0.abs() > 1e-3, "test data must not be re-centred on its own mean");

    for r in &res {
        let n = if r.method == ORIGINAL { 200 } else { (r.rate * 200.0).ceil() as usize };
        if r.method == "binning" {
            assert!(r.reduced_rows <= n);
        } else {
            assert_eq!(r.reduced_rows, n);
        }
    }
}

struct Flaky;

impl Learner for Flaky {
    fn name(&self) -> &str {
        "flaky"
    }

    fn fit(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Predictor>> {
        if train.n_rows() < 50 {
            return Err(Error::EmptyData);
        }
        Ok(Box::new(MeanModel(1.0)))
    }
}

#[test]
fn failures_are_recorded_without_aborting() {
    let mut cfg = ExperimentConfig::new("flaky");
    cfg.rates = vec![0.1, 1.0];
    cfg.repeats = 2;
    cfg.methods = vec![symreduce::reduction::Method::Sampling];
    let res = run_experiment_with(&cfg, &data(100, 0), &data(50, 500), &[&Flaky, &LinearLearner]).unwrap();
    assert_eq!(res.len(), 2 * 2 + 2 * 2);
    for r in &res {
        let should_fail = r.learner == "flaky" && r.rate < 1.0;
        assert_eq!(!r.is_ok(), should_fail, "{r:?}");
        if should_fail {
            assert!(r.status.starts_with("failed: "));
            assert_eq!((r.train_r2, r.test_r2), (None, None));
        } else {
            assert!(r.test_r2.is_some());
        }
    }
}

#[test]
fn results_are_sorted_and_seeded_per_cell() {
    let mut cfg = ExperimentConfig::new("sorted");
    cfg.rates = vec![1.0, 0.3, 0.1];
    cfg.repeats = 2;
    cfg.jobs = 3;
    let res = run_experiment_with(&cfg, &data(100, 0), &data(50, 500), &[&LinearLearner]).unwrap();
    let keys: Vec<(String, f64, usize)> = res.iter().map(|r| (r.method.clone(), r.rate, r.repeat)).collect();
    let methods = ["original", "sampling", "binning", "kmeans"];
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| {
        let rank = |m: &str| methods.iter().position(|x| *x == m).unwrap();
        rank(&a.0).cmp(&rank(&b.0)).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    assert_eq!(keys, sorted);
    let seeds: HashSet<u64> = res.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), res.len());

    // Linear fit on the exact linear part stays perfect on unreduced data.
    let full: Vec<_> = res.iter().filter(|r| r.method == ORIGINAL).collect();
    assert_eq!(full.len(), 2);
    assert_eq!(full[0].test_r2, full[1].test_r2);
    let lin = symreduce::baselines::fit_linear(&data(100, 0));
    let pred = symreduce::baselines::predict_linear(&lin, &data(50, 500)).unwrap();
    let direct = pearson_r2(&pred, data(50, 500).targets()).unwrap();
    assert!((full[0].test_r2.unwrap() - direct).abs() < 1e-9);
}
